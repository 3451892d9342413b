"""
Driving an external simulator, then resuming a run
==================================================

Any program that reads a parameter CSV and writes a fitness CSV can be the
inner loop. Here the "simulator" is a throwaway Python script, launched as a
separate process for every individual. The run is then continued from its
checkpoint through the command line front end.
"""

# %%
import json
import sys
import tempfile
from pathlib import Path

from twoloop import cli
from twoloop.config import RunConfig

work = Path(tempfile.mkdtemp(prefix="twoloop-external-"))

# %%
# The simulator: a shifted bowl in two parameters, maximum 0 at (0.3, -0.7).
simulator = work / "bowl.py"
simulator.write_text("""\
import csv, sys
rows = list(csv.DictReader(open(sys.argv[1])))
x = {r["name"]: float(r["value"]) for r in rows}
f = -((x["a"] - 0.3) ** 2 + (x["b"] + 0.7) ** 2)
open(sys.argv[2], "w").write("fitness\\n%.17g\\n" % f)
""")

# %%
# The parameters are declared in the config; the command template names the
# files the engine writes and reads for each individual.
config = RunConfig(
    run_name="bowl", optimizee="external", optimizer="ce", population_size=12, generations=8,
    optimizee_params={"parameters": {"a": {"lower": [-2.0], "upper": [2.0]},
                                     "b": {"lower": [-2.0], "upper": [2.0]}}},
    external={"command": f"{sys.executable} {simulator} {{params_file}} {{fitness_file}}"},
    max_parallel=4, timeout_seconds=30, seed=3, worst_fitness=-1e9, results_root=str(work / "results"))
config_path = work / "bowl.json"
config.save(config_path)

# %%
# Four simulator processes run at a time; results come back in index order.
cli.main(["run", str(config_path)])
results = work / "results" / "bowl"
print("checkpoint generation:", json.loads((results / "checkpoint.json").read_text())["generation"])

# %%
# A completed run is left alone by ``resume``; a killed run continues from the
# generation after its checkpoint and ends up byte-identical to an
# uninterrupted one.
cli.main(["resume", str(results)])

# %%
# Per-generation statistics for plotting.
cli.main(["export", str(results), str(work / "bowl.csv")])
print((work / "bowl.csv").read_text())
