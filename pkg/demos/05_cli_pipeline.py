"""The whole pipeline through the command-line interface.

Everything the library does is reachable from the `hoplab` command with
plain text files in between, so each stage can be inspected, diffed, and
rerun. This demo shells through the same entry point the console script
uses: synth -> harvest -> train -> eval -> plotdata.

Run: python3 demos/05_cli_pipeline.py  (about half a minute)
"""

import tempfile
from pathlib import Path

from hoplab.cli import main

root = Path(tempfile.mkdtemp(prefix="hoplab-cli-demo-"))
print(f"working directory: {root}\n")

config = root / "task.cfg"
config.write_text(
    "dimension = 128\n"
    "seed = 5\n"
    "num_prototypes = 10\n"
    "instances_per_prototype = 50\n"
    "bernoulli_p = 0.2\n"
)

steps = [
    ["synth", "--config", str(config), "--out", str(root / "task.txt")],
    ["harvest", "--task", str(root / "task.txt"), "--probes", "800",
     "--seed", "1", "--out", str(root / "train.prof")],
    ["harvest", "--task", str(root / "task.txt"), "--probes", "800",
     "--seed", "2", "--out", str(root / "test.prof")],
    ["train", "--model", "svm-linear", "--profiles", str(root / "train.prof"),
     "--out", str(root / "svm.model"), "--seed", "3"],
    ["eval", "--model", str(root / "svm.model"),
     "--profiles", str(root / "test.prof"), "--out", str(root / "report.txt")],
    ["plotdata", "--kind", "profiles", "--inputs", str(root / "train.prof"),
     "--out", str(root / "profiles.dat")],
    ["plotdata", "--kind", "coeffs", "--inputs", str(root / "svm.model"),
     "--out", str(root / "coeffs.dat")],
]

for argv in steps:
    print(f"$ hoplab {' '.join(argv)}")
    rc = main(argv)
    if rc != 0:
        raise SystemExit(f"step failed with exit code {rc}")
    print()

print("evaluation report:")
print((root / "report.txt").read_text())
print("every file above is line-oriented text; open them in a pager or")
print("feed the .dat tables straight into gnuplot or matplotlib.")
