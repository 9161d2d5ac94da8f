"""Drive the ``datathin`` command line from Python.

Each step shells out to the installed console script and prints what it wrote.
Everything goes to a temporary directory.
"""

import json
import subprocess
import sys
import tempfile
from pathlib import Path


def run(*args):
    cmd = [sys.executable, "-m", "datathin.cli", *args]
    print("$ datathin", " ".join(args))
    proc = subprocess.run(cmd, capture_output=True, text=True)
    print("  exit", proc.returncode, proc.stderr.strip())
    return proc.returncode


with tempfile.TemporaryDirectory() as tmp:
    out = Path(tmp)

    # Thin a column of Binomial counts into three folds.
    (out / "counts.csv").write_text("y\n3\n5\n0\n7\n4\n")
    run("thin", "--seed", "1", "--family", "Binomial", "--params", "r=12,p=0.3",
        "--K", "3", "--input", str(out / "counts.csv"), "--out", str(out / "thin"))
    print((out / "thin" / "thin.csv").read_text())

    # Verify the same configuration on fresh draws.
    run("verify", "--seed", "1", "--family", "Binomial", "--params", "r=12,p=0.3",
        "--K", "3", "--B", "20000", "--out", str(out / "verify"))
    report = json.loads((out / "verify" / "report.json").read_text())
    print("  verdict:", report["verdict"])

    # Bad input is reported as JSON on stderr with exit code 2.
    run("thin", "--seed", "1", "--family", "Cauchy", "--params", "loc=0,scale=1",
        "--K", "2", "--input", str(out / "counts.csv"), "--out", str(out / "bad"))

    # Simulate the changepoint comparison under no change.
    run("changepoint-sim", "--seed", "3", "--scenario", "null", "--R", "40",
        "--out", str(out / "sim"))
    print((out / "sim" / "aggregate.csv").read_text())
