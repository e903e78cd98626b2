"""
The command-line workflow
=========================

Drive the ``cascade-hawkes`` command from Python: simulate from the worked
vaccine-story parameter file, refit, then export intensity curves and
residuals. The same calls work from a shell, e.g.
``cascade-hawkes simulate demos/vaccine_story_fit.params.json --mean-followers 150 --out-dir run``.
"""

# %%
import csv
import json
import tempfile
from pathlib import Path

import numpy as np

from cascade_hawkes.cli import main

here = Path(__file__).resolve().parent
params = str(here / "vaccine_story_fit.params.json")
run = Path(tempfile.mkdtemp(prefix="cascade-hawkes-"))
print("outputs in", run)

# %%
# simulate: writes edges.csv (the generated graph), events.jsonl,
# sim_report.json and a manifest describing the run.
code = main(["simulate", params, "--mean-followers", "150", "--graph-seed", "1", "--seed", "0",
             "--out-dir", str(run / "sim")])
print("exit code", code, json.loads((run / "sim" / "sim_report.json").read_text())["counts"]["total"])

# %%
# fit: exit code 0 means EM converged, 1 means it stopped at --max-iters (the
# report is written either way).
code = main(["fit", str(run / "sim" / "events.jsonl"), str(run / "sim" / "edges.csv"),
             "--horizon", "480", "--users", "4577", "--out-dir", str(run / "fit")])
fitted = json.loads((run / "fit" / "params.json").read_text())
print("exit code", code, {k: round(fitted[k], 4) for k in ("mu_s", "mu_n", "x", "omega_s", "omega_n")})

# %%
# intensity: supporting and not-supporting curves on a uniform grid.
main(["intensity", str(run / "sim" / "events.jsonl"), params, "--grid", "25", "--out-dir", str(run / "lam")])
with open(run / "lam" / "intensity.csv", newline="") as fh:
    lam = [(float(r["t"]), float(r["lambda_s"]), float(r["lambda_n"])) for r in csv.DictReader(fh)]
for t, ls, ln in lam[::4]:
    print(f"t={t:6.1f}h  supporting {ls:8.3f}  not supporting {ln:7.3f}")
print("supporting on top everywhere:", all(ls > ln for _, ls, ln in lam))

# %%
# residuals: rescaled interarrivals and a KS test against Exp(1).
main(["residuals", str(run / "sim" / "events.jsonl"), params, "--kernel", "inherit", "--out-dir", str(run / "res")])
ks = json.loads((run / "res" / "ks.json").read_text())
print(f"KS distance {ks['statistic']:.4f}, p-value {ks['pvalue']:.3f}")
print("manifests:", sorted(p.name for p in run.rglob("*.manifest.json")))
print("mean residual", np.mean([float(r["residual"]) for r in csv.DictReader(open(run / "res" / "residuals.csv"))]))
