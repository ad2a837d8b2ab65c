"""Covariance-eigendecomposition PCA for the PCA-IF reference detector."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class PcaModel:
    mean: np.ndarray
    components: np.ndarray  # (n_components, k), rows orthonormal
    explained_variance: np.ndarray

    @property
    def n_components(self) -> int:
        return int(self.components.shape[0])

    @property
    def dim(self) -> int:
        return int(self.components.shape[1])

    def to_dict(self) -> dict:
        return {
            "mean": self.mean.tolist(),
            "components": self.components.tolist(),
            "explained_variance": self.explained_variance.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> PcaModel:
        return cls(
            mean=np.asarray(d["mean"], dtype=np.float64),
            components=np.atleast_2d(np.asarray(d["components"], dtype=np.float64)),
            explained_variance=np.asarray(d["explained_variance"], dtype=np.float64),
        )


def fit_pca(
    windows: np.ndarray,
    n_components: int | None = 2,
    variance_coverage: float | None = None,
) -> PcaModel:
    """Fit PCA on the rows of ``windows``.

    Either keep ``n_components`` leading components, or (when
    ``variance_coverage`` is given) the fewest reaching that fraction of the
    total variance. Each component is flipped so its largest-magnitude
    coordinate is positive.
    """
    x = np.atleast_2d(np.asarray(windows, dtype=np.float64))
    n, k = x.shape
    if variance_coverage is None:
        if n_components is None or not 1 <= n_components <= k:
            raise ValueError(f"n_components must lie in [1, {k}], got {n_components}")
        if n < n_components + 1:
            raise ValueError(f"need at least {n_components + 1} windows, got {n}")
    elif not 0 < variance_coverage <= 1:
        raise ValueError("variance_coverage must lie in (0, 1]")
    elif n < 2:
        raise ValueError(f"need at least 2 windows, got {n}")

    mean = x.mean(axis=0)
    centered = x - mean
    cov = centered.T @ centered / n
    evals, evecs = np.linalg.eigh(cov)
    order = np.argsort(evals)[::-1]
    evals = np.clip(evals[order], 0.0, None)
    evecs = evecs[:, order].T

    if variance_coverage is not None:
        total = evals.sum()
        if total == 0:
            n_components = 1
        else:
            frac = np.cumsum(evals) / total
            n_components = int(np.searchsorted(frac, variance_coverage - 1e-12) + 1)
        n_components = min(n_components, k)

    comps = evecs[:n_components].copy()
    pivot = np.argmax(np.abs(comps), axis=1)
    signs = np.sign(comps[np.arange(n_components), pivot])
    comps *= np.where(signs == 0, 1.0, signs)[:, None]
    return PcaModel(mean=mean, components=comps, explained_variance=evals[:n_components].copy())


def transform_pca(m: PcaModel, w: np.ndarray) -> np.ndarray:
    w = np.asarray(w, dtype=np.float64)
    if w.shape[-1] != m.dim:
        raise ValueError(f"expected windows of length {m.dim}, got {w.shape[-1]}")
    return (w - m.mean) @ m.components.T


def inverse_transform_pca(m: PcaModel, y: np.ndarray) -> np.ndarray:
    return np.asarray(y, dtype=np.float64) @ m.components + m.mean
