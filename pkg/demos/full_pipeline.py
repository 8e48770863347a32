"""
End-to-end pipeline on disk
===========================

The same flow the command line drives: synthesize a corpus directory,
train, dump predictions, and score them. Every artifact is a plain file,
and identical seeds reproduce identical bytes.
"""

import subprocess
import sys
import tempfile
from pathlib import Path

root = Path(tempfile.mkdtemp(prefix="mixqa_demo_"))
corpus = root / "corpus"
run = lambda *args: subprocess.run([sys.executable, "-m", "mixqa.cli", *args], check=True)

run("synth", "--out", str(corpus), "--seed", "3", "--movies", "30",
    "--collision-rate", "0.2", "--min-count", "3")

run("train-reader", "--corpus", str(corpus), "--out", str(root / "reader.json"),
    "--retriever", "r1",
    "--set", "d_w=32", "--set", "d_e=32", "--set", "hidden=32", "--set", "n_e=200",
    "--set", "lr=3e-3", "--set", "max_epochs=3", "--set", "seed=3")

run("answer", "--corpus", str(corpus), "--model", str(root / "reader.json"),
    "--split", "test", "--out", str(root / "preds.tsv"))

run("evaluate", "--corpus", str(corpus), "--predictions", str(root / "preds.tsv"),
    "--split", "test", "--out", str(root / "report.json"))

run("retrieve", "--corpus", str(corpus), "--kind", "r1", "--split", "test",
    "--out", str(root / "retrieval.tsv"))
run("evaluate", "--corpus", str(corpus), "--retrieval", str(root / "retrieval.tsv"),
    "--split", "test", "--out", str(root / "retrieval_report.json"))

print("\nartifacts under", root)
for p in sorted(root.rglob("*")):
    if p.is_file():
        print("  ", p.relative_to(root))
