"""Trajectory sampling and empirical moments for independent verification.

Randomness: NumPy's ``default_rng`` (PCG64) seeded explicitly, so batches
are reproducible across runs and platforms for a fixed (inputs, seed)
pair.  Sampling is pure given the seed; shards may derive per-shard seeds
from a SeedSequence if parallel generation is ever needed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .chain import DiscreteGaussProcess, TimeGrid

__all__ = ["TrajectoryBatch", "sample_bridge", "sample_process", "empirical_moments"]


@dataclass(frozen=True)
class TrajectoryBatch:
    """M trajectories over the grid: samples has shape (M, N+2, D)."""

    samples: np.ndarray
    grid: TimeGrid
    seed: int

    def __post_init__(self) -> None:
        arr = np.array(self.samples, dtype=float)
        if arr.ndim != 3 or arr.shape[0] < 1 or arr.shape[1] != self.grid.n_slices:
            raise ValueError("samples must have shape (M, N+2, D) with M >= 1")
        if not np.all(np.isfinite(arr)):
            raise ValueError("samples must be finite")
        arr.setflags(write=False)
        object.__setattr__(self, "samples", arr)

    @property
    def count(self) -> int:
        return self.samples.shape[0]

    @property
    def dim(self) -> int:
        return self.samples.shape[2]

    def flattened(self) -> np.ndarray:
        """(M, (N+2)*D) view, time-major like DiscreteGaussProcess."""
        return self.samples.reshape(self.count, -1)


def sample_bridge(x0: np.ndarray, x1: np.ndarray, grid: TimeGrid,
                  epsilon: float, count: int, seed: int) -> TrajectoryBatch:
    """Brownian-bridge trajectories pinned at x0, x1 (volatility epsilon).

    Interior slices are drawn sequentially from the Markov conditionals
    x_{t+} | x_t, x_1 of the bridge, so endpoints are kept bitwise.  x0/x1
    may be single points of shape (D,) or per-trajectory arrays (count, D).
    """
    if not epsilon > 0.0:
        raise ValueError("epsilon must be positive")
    if count < 1:
        raise ValueError("count must be >= 1")
    x0 = np.atleast_1d(np.asarray(x0, dtype=float))
    x1 = np.atleast_1d(np.asarray(x1, dtype=float))
    d = x0.shape[-1]
    starts = np.broadcast_to(x0, (count, d))
    ends = np.broadcast_to(x1, (count, d))
    rng = np.random.default_rng(seed)
    out = np.empty((count, grid.n_slices, d))
    out[:, 0, :] = starts
    out[:, -1, :] = ends
    cur = starts.copy()
    t_cur = 0.0
    for k in range(1, grid.n_slices - 1):
        t = grid.times[k]
        frac = (t - t_cur) / (1.0 - t_cur)
        mean = cur + frac * (ends - cur)
        var = epsilon * (t - t_cur) * (1.0 - t) / (1.0 - t_cur)
        cur = mean + np.sqrt(var) * rng.standard_normal((count, d))
        out[:, k, :] = cur
        t_cur = t
    return TrajectoryBatch(out, grid, seed)


def sample_process(proc: DiscreteGaussProcess, count: int, seed: int) -> TrajectoryBatch:
    """i.i.d. draws from the full joint Gaussian of a discrete process."""
    if count < 1:
        raise ValueError("count must be >= 1")
    cov = 0.5 * (proc.joint_cov + proc.joint_cov.T)
    try:
        factor = np.linalg.cholesky(cov)
    except np.linalg.LinAlgError:
        # PSD but rank-deficient joints (deterministic slices) fall back to
        # an eigenvalue factor with the noise floor clamped at zero.
        eigs, vecs = np.linalg.eigh(cov)
        if eigs[0] < -1e-10 * max(float(eigs[-1]), 1.0):
            raise np.linalg.LinAlgError("joint covariance is not PSD")
        factor = vecs * np.sqrt(np.clip(eigs, 0.0, None))
    rng = np.random.default_rng(seed)
    z = rng.standard_normal((count, cov.shape[0]))
    flat = proc.joint_mean + z @ factor.T
    return TrajectoryBatch(flat.reshape(count, proc.grid.n_slices, proc.dim),
                           proc.grid, seed)


def empirical_moments(batch: TrajectoryBatch) -> tuple[np.ndarray, np.ndarray]:
    """Unbiased sample mean and covariance over flattened slices (M-1 divisor)."""
    if batch.count < 2:
        raise ValueError("need at least two samples for a covariance")
    flat = batch.flattened()
    mean = flat.mean(axis=0)
    centered = flat - mean
    cov = centered.T @ centered / (batch.count - 1)
    return mean, 0.5 * (cov + cov.T)
