"""Evaluator fixture: fitness is the sum of every parameter component."""
import csv
import math
import sys

params_file, fitness_file = sys.argv[1], sys.argv[2]
with open(params_file, newline="") as fh:
    rows = list(csv.DictReader(fh))
total = math.fsum(float(r["value"]) for r in rows)
with open(fitness_file, "w") as fh:
    fh.write("fitness\n%.17g\n" % total)
