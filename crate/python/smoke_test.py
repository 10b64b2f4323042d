#!/usr/bin/env python3
"""Smoke test for the slotalign_py extension module.

Builds a small attributed graph, aligns it against a relabeled copy, and
checks that the recovered matching is essentially perfect. Run after
`cargo build -p slotalign-python` (debug or release).
"""

import random
import shutil
import sys
import tempfile
from pathlib import Path


def locate_extension() -> Path:
    root = Path(__file__).resolve().parents[1]
    candidates = [
        root / "target" / profile / name
        for profile in ("release", "debug")
        for name in ("libslotalign_py.so", "slotalign_py.so", "libslotalign_py.dylib")
    ]
    for path in candidates:
        if path.exists():
            return path
    sys.exit("extension not found; run: cargo build -p slotalign-python")


def import_module():
    ext = locate_extension()
    staging = Path(tempfile.mkdtemp(prefix="slotalign-py-"))
    shutil.copy2(ext, staging / "slotalign_py.so")
    sys.path.insert(0, str(staging))
    import slotalign_py

    return slotalign_py


def main() -> None:
    sa = import_module()
    rng = random.Random(7)

    n, d = 16, 8
    edges = [(i, (i + 1) % n) for i in range(n)]
    while len(edges) < n + 10:
        i, j = rng.randrange(n), rng.randrange(n)
        if i != j:
            edges.append((i, j))
    features = [[rng.random() for _ in range(d)] for _ in range(n)]

    g = sa.Graph(n, edges, features)
    assert g.n == n and g.feature_dim == d
    assert all(i < j for i, j in g.edges()), "edges are canonicalized"

    target, anchors = sa.make_target(g, 42)
    assert target.n == n and len(anchors) == n

    result = sa.align(g, target, num_bases=2, tau=0.1)
    assert len(result.coupling) == n and len(result.coupling[0]) == n
    assert abs(sum(result.beta_s) - 1.0) < 1e-9
    assert abs(sum(result.beta_t) - 1.0) < 1e-9
    assert result.trace[0][0] == 0 and len(result.trace) == result.iterations + 1

    hits = sa.hit_at_k(result.coupling, anchors, [1, 5])
    assert hits[1] >= 99.0, f"self-alignment Hit@1 was {hits[1]}"
    assert hits[5] >= hits[1]

    noisy = sa.perturb_edges(target, 0.2, sa.derive_seed(42, 1))
    assert noisy.num_edges == target.num_edges
    fewer = sa.truncate_features(target, 0.5, 3)
    assert fewer.feature_dim == d - round(0.5 * d)
    shuffled = sa.permute_features(target, 0.5, 4)
    assert shuffled.feature_dim == d
    squeezed = sa.compress_features(target, 0.5)
    assert squeezed.feature_dim == max(1, round(0.5 * d))

    noisy_result = sa.align(g, noisy, num_bases=2, tau=0.1)
    noisy_hits = sa.hit_at_k(noisy_result.coupling, anchors, [1])
    print(f"clean Hit@1 = {hits[1]:.2f}, 20% edge noise Hit@1 = {noisy_hits[1]:.2f}")
    print("smoke test passed")


if __name__ == "__main__":
    main()
