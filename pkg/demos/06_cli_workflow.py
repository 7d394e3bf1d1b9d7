"""End-to-end command-line workflow.

Drives the `swag` CLI programmatically: write a grouped dataset to disk,
fit the model from a config file, inspect the persisted draws container,
and run the chain diagnostics.  Every artifact is a plain file, so runs are
easy to archive and reproduce.
"""

import tempfile
from pathlib import Path

import numpy as np

from swagcov.cli import main
from swagcov.data import Group, GroupedDataset, read_draws, save_dataset
from swagcov.linalg import MatrixShape

workdir = Path(tempfile.mkdtemp(prefix="swag-demo-"))
print("working in", workdir)

# A small two-group dataset of vectorized 2x2 observations, written as one
# CSV per group plus a manifest naming the files and the matrix shape.
rng = np.random.default_rng(6)
shape = MatrixShape(2, 2)
data = GroupedDataset(
    [
        Group("alpha", rng.standard_normal((12, 4))),
        Group("beta", 1.5 * rng.standard_normal((12, 4))),
    ],
    shape,
)
manifest = save_dataset(data, workdir, name="demo")
print("\nmanifest", manifest.name, "contains:")
print(manifest.read_text())

configfile = workdir / "run.cfg"
configfile.write_text(
    """# short chain for demonstration purposes
iterations = 2000
burn_in = 500
thin = 5
seed = 42
"""
)

outdir = workdir / "fit"
print(f"$ swag fit --dataset {manifest.name} --config run.cfg --out fit/")
main(["fit", "--dataset", str(manifest), "--config", str(configfile), "--out", str(outdir)])

print("\nartifacts:")
for f in sorted(outdir.iterdir()):
    print(f"  {f.name:22s} {f.stat().st_size:8d} bytes")

print("\nestimate for group alpha (rescaled to the original data units):")
print((outdir / "estimate_alpha.csv").read_text())

draws = read_draws(outdir / "draws.bin")
print(f"draws container shape (draws, groups, p, p): {draws.shape}")

diagdir = workdir / "diag"
print(f"\n$ swag diagnose --draws fit/draws.bin --out diag/ --trace 0,0,0")
main(["diagnose", "--draws", str(outdir / "draws.bin"), "--out", str(diagdir), "--trace", "0,0,0"])
print("\ndiagnostics.txt:")
print((diagdir / "diagnostics.txt").read_text())
