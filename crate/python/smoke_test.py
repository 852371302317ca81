#!/usr/bin/env python3
"""Smoke test for the symdrift_py extension module.

Builds nothing itself: run `cargo build -p symdrift-py` (or --release)
first, then `python3 python/smoke_test.py`. The script locates the compiled
cdylib under target/, stages it under an importable name, and exercises the
main types and operations.
"""

import math
import shutil
import sys
import tempfile
from pathlib import Path

REPO = Path(__file__).resolve().parent.parent


def stage_module() -> None:
    candidates = [
        REPO / "target" / profile / name
        for profile in ("release", "debug")
        for name in ("libsymdrift_py.so", "libsymdrift_py.dylib", "symdrift_py.dll")
    ]
    built = next((p for p in candidates if p.exists()), None)
    if built is None:
        sys.exit("no compiled extension found; run `cargo build -p symdrift-py` first")
    stage = Path(tempfile.mkdtemp(prefix="symdrift_py_"))
    suffix = ".so" if built.suffix in (".so", ".dylib") else ".pyd"
    shutil.copy2(built, stage / f"symdrift_py{suffix}")
    sys.path.insert(0, str(stage))


stage_module()

import symdrift_py as sd  # noqa: E402

checks = 0


def check(condition: bool, label: str) -> None:
    global checks
    if not condition:
        sys.exit(f"FAIL: {label}")
    checks += 1
    print(f"ok: {label}")


# conformations and centering
conf = sd.Conformation([[1.0, 0.0, 0.0], [-1.0, 0.2, 0.0], [0.3, 2.0, -0.4]], [0, 0, 1], "demo")
check(conf.n_atoms() == 3, "conformation construction")
centered = conf.centered()
col_sums = [sum(row[a] for row in centered.coords) for a in range(3)]
check(max(abs(s) for s in col_sums) < 1e-12, "centering zeroes column sums")

# group actions
rot = sd.sample_haar_rotation(seed=7)
ortho_defect = max(
    abs(sum(rot[i][k] * rot[j][k] for k in range(3)) - (1.0 if i == j else 0.0))
    for i in range(3)
    for j in range(3)
)
check(ortho_defect < 1e-10, "haar rotation is orthogonal")
perm = sd.sample_type_permutation(seed=7, types=[0, 0, 1])
check(sorted(perm) == [0, 1, 2] and perm[2] == 2, "type permutation preserves types")
g = sd.GroupElement(rot, perm)
moved = g.apply(centered)
back = g.inverse().apply(moved)
diff = max(
    abs(a - b) for ra, rb in zip(back.coords, centered.coords) for a, b in zip(ra, rb)
)
check(diff < 1e-12, "group element round trip")

# invariant embedding
vals, blocks = sd.embed(centered)
vals_moved, _ = sd.embed(moved)
check(len(vals) == 3, "embedding has N(N-1)/2 entries")
check(max(abs(a - b) for a, b in zip(vals, vals_moved)) < 1e-10, "embedding is invariant")
grad, tie = sd.embed_pullback(centered, [1.0] * len(vals))
check(len(grad) == 3 and not tie, "embedding pullback shape")

# alignment recovers a group transform
g2 = sd.GroupElement(sd.sample_haar_rotation(seed=21), sd.sample_type_permutation(seed=21, types=[0, 0, 1]))
target = g2.apply(centered)
element, residual, iterations = sd.align(centered, target, variant="brute_force")
check(residual < 1e-8, "brute-force alignment collapses an orbit pair")
perm_h, cost = sd.hungarian_assignment([[0.0, 1.0], [1.0, 0.0]])
check(perm_h == [0, 1] and cost == 0.0, "hungarian zero diagonal")

# metrics
check(sd.rmsd_aligned(centered, moved) < 1e-8, "rmsd ignores rotations")
check(abs(sd.dmae(centered, centered)) == 0.0, "dmae of identical clouds")
cov = sd.coverage_amr([centered], [centered], delta=0.5)
check(cov["cov_r"] == 1.0 and cov["amr_r"] < 1e-10, "coverage of identical sets")

# drift field fixed point
drift = sd.multi_temperature_drift(
    points=[[0.0, 0.0]], pos_targets=[[0.0, 0.0]], neg_targets=[], temperatures=[0.1]
)
check(max(abs(v) for v in drift[0]) < 1e-12, "drift vanishes at a fixed point")

# the aggregated field identity: single target gives -x
x = sd.Conformation([[0.9, 0.1, -0.2], [-0.9, -0.1, 0.2]], [0, 1], "x").centered()
y = sd.Conformation([[0.3, 0.8, 0.0], [-0.3, -0.8, 0.0]], [0, 1], "y").centered()
agg, se, n = sd.mc_aggregated_drift(x, [y], tau=0.5, n_group_samples=20000, seed=3)
err = math.sqrt(
    sum((a + b) ** 2 for ra, rb in zip(agg, x.coords) for a, b in zip(ra, rb))
)
check(err < 3.0 * se, f"aggregated drift equals -x within 3 standard errors (err={err:.2e})")

# dataset round trip and a short end-to-end pipeline
with tempfile.TemporaryDirectory(prefix="symdrift_smoke_") as tmp:
    tmp = Path(tmp)
    ds_path = tmp / "dataset.txt"
    class_ids = sd.generate_dataset(
        str(ds_path), seed=5, n_classes=2, atoms_min=3, atoms_max=3, conformers=4
    )
    check(len(class_ids) == 2, "toy dataset generation")
    loaded = sd.load_dataset(str(ds_path))
    check(set(loaded.keys()) == set(class_ids), "dataset round trip")

    cfg = tmp / "experiment.cfg"
    cfg.write_text(
        "seed = 11\n"
        "data.n_classes = 1\n"
        "data.atoms_min = 2\n"
        "data.atoms_max = 2\n"
        "data.conformers_min = 3\n"
        "data.conformers_max = 3\n"
        "train.steps = 20\n"
        "train.n_neg = 8\n"
        "train.n_classes_per_step = 1\n"
        "train.hidden = 16,16\n"
        "drift.space = embedded\n"
    )
    passed, metrics = sd.run_experiment(str(cfg), str(tmp / "out"))
    check(passed and "mean.amr_r" in metrics, "experiment pipeline runs")

report = sd.verify(seed=0, n_group_samples=4000)
names = {name for name, *_ in report}
check("aggregated_identity" in names, "verification suite runs")

print(f"\nsmoke test passed ({checks} checks)")
