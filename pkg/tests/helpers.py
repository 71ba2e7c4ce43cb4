from __future__ import annotations

import numpy as np

from eulerspec import FourierFlow

TWO_PI = 2.0 * np.pi


def random_point(rng) -> np.ndarray:
    return rng.uniform(0.0, TWO_PI, 3)


def unit_vector(rng) -> np.ndarray:
    v = rng.standard_normal(3)
    return v / np.linalg.norm(v)


def random_divfree_flow(rng, n_modes: int = 3, kmax: int = 2) -> FourierFlow:
    """A random Hermitian, divergence-free mode set (not steady in general)."""
    ks, cs = [], []
    seen = set()
    while len(ks) < 2 * n_modes:
        k = rng.integers(-kmax, kmax + 1, 3)
        key = tuple(k)
        if not k.any() or key in seen or tuple(-k) in seen:
            continue
        c = rng.standard_normal(3) + 1j * rng.standard_normal(3)
        kf = k.astype(float)
        c = c - (c @ kf) * kf / (kf @ kf)
        if np.linalg.norm(c) < 1e-3:
            continue
        seen.add(key)
        ks.extend([k, -k])
        cs.extend([c, np.conj(c)])
    return FourierFlow(name="random-divfree", k=np.array(ks), c=np.array(cs))
