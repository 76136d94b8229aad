"""Running an experiment the way the CLI does.

A flat config file selects the experiment; results are CSV with a separate
metadata sidecar so reruns are byte-identical. Equivalent shell command:

    upr sweep-esr --config sweep.cfg --out esr.csv
"""
import os
import tempfile

from upr.cli import main

CONFIG = """experiment = esr_sweep
solver = sparta
n = 40
k = 3
L = 20
m_over_n = 1.0, 1.5, 2.0
case = 1, 3
trials = 50
train_size = 512
epochs = 20
seed = 0
"""

with tempfile.TemporaryDirectory() as d:
    cfg = os.path.join(d, "sweep.cfg")
    with open(cfg, "w") as fh:
        fh.write(CONFIG)
    main(["sweep-esr", "--config", cfg, "--out", os.path.join(d, "esr.csv")])
