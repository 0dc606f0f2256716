"""Small synthetic imbalanced datasets for smoke tests and demos."""
from __future__ import annotations

import numpy as np

from .dataset import LabeledDataset


def _pack(Xp, Xn, name) -> LabeledDataset:
    X = np.vstack([Xp, Xn])
    y = np.concatenate([np.ones(len(Xp), dtype=np.int64), -np.ones(len(Xn), dtype=np.int64)])
    return LabeledDataset(X, y, name)


def gaussian_blobs(n_pos: int = 20, n_neg: int = 100, separation: float = 6.0,
                   spread: float = 1.0, seed: int = 0, name: str = "blobs",
                   max_radius: float | None = None) -> LabeledDataset:
    """Two isotropic 2-D Gaussians whose centres are ``separation`` apart.

    With ``max_radius`` every draw farther than ``max_radius * spread`` from
    its centre is redrawn, which guarantees a gap of
    ``separation - 2 * max_radius * spread`` between the classes.
    """
    rng = np.random.default_rng(seed)

    def draw(n):
        out = rng.normal(0.0, spread, (n, 2))
        if max_radius is not None:
            while True:
                bad = np.linalg.norm(out, axis=1) > max_radius * spread
                if not bad.any():
                    break
                out[bad] = rng.normal(0.0, spread, (int(bad.sum()), 2))
        return out

    Xp = draw(n_pos) + [separation, 0.0]
    Xn = draw(n_neg)
    return _pack(Xp, Xn, name)


def overlapping_blobs(n_pos=24, n_neg=120, seed=0, name="overlap") -> LabeledDataset:
    """Heavily overlapping Gaussians in 4-D with a few mislabeled negatives."""
    rng = np.random.default_rng(seed)
    Xp = rng.normal(1.2, 1.0, (n_pos, 4))
    Xn = rng.normal(0.0, 1.0, (n_neg, 4))
    flip = rng.choice(n_neg, size=n_neg // 20, replace=False)
    Xn[flip] = rng.normal(1.2, 0.6, (len(flip), 4))
    return _pack(Xp, Xn, name)


def ring(n_pos=30, n_neg=120, noise=0.25, seed=0, name="ring") -> LabeledDataset:
    """Minority disc surrounded by a noisy majority annulus."""
    rng = np.random.default_rng(seed)
    r_in = np.sqrt(rng.random(n_pos)) * 1.0
    t_in = rng.random(n_pos) * 2 * np.pi
    r_out = 1.4 + rng.random(n_neg) * 1.0
    t_out = rng.random(n_neg) * 2 * np.pi
    Xp = np.c_[r_in * np.cos(t_in), r_in * np.sin(t_in)] + rng.normal(0, noise, (n_pos, 2))
    Xn = np.c_[r_out * np.cos(t_out), r_out * np.sin(t_out)] + rng.normal(0, noise, (n_neg, 2))
    return _pack(Xp, Xn, name)


def scattered_minority(n_pos=24, n_neg=144, seed=0, name="clusters") -> LabeledDataset:
    """Minority split into three small clusters inside a broad majority cloud."""
    rng = np.random.default_rng(seed)
    centres = np.array([[2.0, 2.0, 0.0], [-2.0, 2.0, 1.0], [0.0, -2.5, -1.0]])
    Xp = centres[np.arange(n_pos) % 3] + rng.normal(0, 0.6, (n_pos, 3))
    Xn = rng.normal(0, 2.0, (n_neg, 3))
    return _pack(Xp, Xn, name)


SURROGATES = {"overlap": overlapping_blobs, "ring": ring, "clusters": scattered_minority}
