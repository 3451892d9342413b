"""Evaluator fixture: sleeps for argv[3] seconds, then reports the sum of the parameters."""
import csv
import math
import sys
import time

params_file, fitness_file, delay = sys.argv[1], sys.argv[2], float(sys.argv[3])
time.sleep(delay)
with open(params_file, newline="") as fh:
    total = math.fsum(float(r["value"]) for r in csv.DictReader(fh))
with open(fitness_file, "w") as fh:
    fh.write("fitness\n%.17g\n" % total)
