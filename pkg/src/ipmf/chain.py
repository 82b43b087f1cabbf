"""Discrete-time Gaussian processes in exact matrix form.

A process over the grid 0 = t_0 < ... < t_{N+1} = 1 is stored as the dense
joint Gaussian of all time slices (time-major stacking), which keeps every
projection a few lines of covariance algebra at desk scale.  Transition
conditionals are derived views.

The three projections:

* reciprocal: keep the endpoint joint, glue the Brownian-bridge interior;
* Markovian: keep all per-time marginals, keep adjacent-time conditionals,
  drop longer-range dependence (forward or backward parameterization);
* pinning (proportional fitting): keep the transition conditionals of a
  Markov process, replace its starting marginal by the target.

Scalar products from the one-dimensional theory generalize with regression
blocks composed in time order and every 2t(1-t)*cross term symmetrized as
t(1-t)(S + S^T); the Monte-Carlo module arbitrates these choices.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Literal

import numpy as np

from .gaussian import (
    GaussianND,
    JointGaussian,
    SingularMatrixError,
    SINGULARITY_FLOOR,
    precision_cross_block,
    symmetrize,
)

__all__ = [
    "ConvergenceError",
    "TimeGrid",
    "DiscreteGaussProcess",
    "MatrixProblem",
    "StartCoupling",
    "wiener_joint",
    "make_start",
    "reciprocal_project",
    "markov_project",
    "ipf_project",
    "ipmf_round_nd",
    "sb_oracle",
    "optimality_certificate",
]

Tag = Literal["reciprocal", "markov_forward", "markov_backward", "general"]
StartKind = Literal["imf", "ipf", "ind_p0", "custom"]


class ConvergenceError(RuntimeError):
    """Fixed-point iteration exhausted its round cap without converging."""


@dataclass(frozen=True)
class TimeGrid:
    """Strictly increasing times with t_0 = 0 and t_{N+1} = 1."""

    times: tuple[float, ...]

    def __post_init__(self) -> None:
        ts = tuple(float(t) for t in self.times)
        if len(ts) < 2 or ts[0] != 0.0 or ts[-1] != 1.0:
            raise ValueError("grid must start at 0 and end at 1")
        if any(b <= a for a, b in zip(ts, ts[1:])):
            raise ValueError("grid times must be strictly increasing")
        object.__setattr__(self, "times", ts)

    @classmethod
    def uniform(cls, n_interior: int) -> "TimeGrid":
        if n_interior < 1:
            raise ValueError("need at least one interior time")
        return cls(tuple(np.linspace(0.0, 1.0, n_interior + 2)))

    @property
    def n_interior(self) -> int:
        return len(self.times) - 2

    @property
    def n_slices(self) -> int:
        return len(self.times)


@dataclass(frozen=True)
class DiscreteGaussProcess:
    """Dense joint Gaussian over all time slices of a discrete process."""

    grid: TimeGrid
    dim: int
    joint_mean: np.ndarray
    joint_cov: np.ndarray
    tag: Tag = "general"

    def __post_init__(self) -> None:
        n = self.grid.n_slices * self.dim
        mean = np.array(self.joint_mean, dtype=float)
        cov = np.array(self.joint_cov, dtype=float)
        if mean.shape != (n,) or cov.shape != (n, n):
            raise ValueError("joint mean/cov shape inconsistent with grid")
        eigs = np.linalg.eigvalsh(symmetrize(cov))
        if eigs[0] < -1e-10 * max(eigs[-1], 1.0):
            raise ValueError("process joint covariance is not PSD")
        mean.setflags(write=False)
        cov.setflags(write=False)
        object.__setattr__(self, "joint_mean", mean)
        object.__setattr__(self, "joint_cov", cov)

    def mean_at(self, i: int) -> np.ndarray:
        d = self.dim
        return self.joint_mean[i * d:(i + 1) * d]

    def cov_block(self, i: int, j: int) -> np.ndarray:
        d = self.dim
        return self.joint_cov[i * d:(i + 1) * d, j * d:(j + 1) * d]

    def endpoint_joint(self) -> JointGaussian:
        last = self.grid.n_slices - 1
        return JointGaussian(self.mean_at(0), self.mean_at(last),
                             symmetrize(self.cov_block(0, 0)),
                             symmetrize(self.cov_block(last, last)),
                             self.cov_block(0, last))


@dataclass(frozen=True)
class MatrixProblem:
    """Endpoint marginals, prior volatility and time grid."""

    p0: GaussianND
    p1: GaussianND
    epsilon: float
    grid: TimeGrid

    def __post_init__(self) -> None:
        if self.p0.dim != self.p1.dim:
            raise ValueError("endpoint marginals must share a dimension")
        if not self.epsilon > 0.0:
            raise ValueError("epsilon must be positive")

    @property
    def dim(self) -> int:
        return self.p0.dim


@dataclass(frozen=True)
class StartCoupling:
    """Initial endpoint coupling choice; `custom` carries its own joint."""

    kind: StartKind
    custom: JointGaussian | None = None

    def __post_init__(self) -> None:
        if self.kind == "custom" and self.custom is None:
            raise ValueError("custom start requires a joint")
        if self.kind != "custom" and self.custom is not None:
            raise ValueError("only custom starts carry a joint")


def wiener_joint(problem: MatrixProblem) -> JointGaussian:
    """Endpoint joint of the volatility-eps Wiener prior started at p0."""
    d = problem.dim
    s0 = problem.p0.covariance
    return JointGaussian(problem.p0.mean, problem.p0.mean, s0,
                         symmetrize(s0 + problem.epsilon * np.eye(d)), s0)


def make_start(problem: MatrixProblem, start: StartCoupling) -> JointGaussian:
    """Initial coupling: independent p0 x p1, the Wiener prior, p0 x p0, or custom."""
    d = problem.dim
    zero = np.zeros((d, d))
    if start.kind == "imf":
        return JointGaussian(problem.p0.mean, problem.p1.mean,
                             problem.p0.covariance, problem.p1.covariance, zero)
    if start.kind == "ipf":
        return wiener_joint(problem)
    if start.kind == "ind_p0":
        return JointGaussian(problem.p0.mean, problem.p0.mean,
                             problem.p0.covariance, problem.p0.covariance, zero)
    assert start.custom is not None
    if start.custom.dim != d:
        raise ValueError("custom joint dimension mismatch")
    return start.custom


def reciprocal_project(joint: JointGaussian, problem: MatrixProblem) -> DiscreteGaussProcess:
    """Glue the Brownian-bridge interior onto an endpoint joint.

    Each slice is x_t = (1-t) x0 + t x1 + b_t with b the volatility-eps
    Brownian bridge, so for t <= u:

        Cov(x_t, x_u) = (1-t)(1-u) S00 + (1-t)u S01 + t(1-u) S01^T
                        + t u S11 + eps t(1-u) I.

    Endpoint blocks reproduce the input joint exactly.
    """
    d = problem.dim
    times = problem.grid.times
    n = len(times)
    s00, s11, s01 = joint.cov00, joint.cov11, joint.cov01
    eye = np.eye(d)
    mean = np.empty(n * d)
    cov = np.empty((n * d, n * d))
    for i, t in enumerate(times):
        mean[i * d:(i + 1) * d] = (1.0 - t) * joint.mean0 + t * joint.mean1
    for i, t in enumerate(times):
        for j in range(i, n):
            u = times[j]
            blk = ((1.0 - t) * (1.0 - u) * s00 + (1.0 - t) * u * s01
                   + t * (1.0 - u) * s01.T + t * u * s11
                   + problem.epsilon * t * (1.0 - u) * eye)
            cov[i * d:(i + 1) * d, j * d:(j + 1) * d] = blk
            if j != i:
                cov[j * d:(j + 1) * d, i * d:(i + 1) * d] = blk.T
    try:
        return DiscreteGaussProcess(problem.grid, d, mean, symmetrize(cov),
                                    tag="reciprocal")
    except ValueError as exc:
        raise ValueError("reciprocal projection produced a non-PSD joint; "
                         "input coupling is invalid") from exc


def _transition(proc: DiscreteGaussProcess, src: int, dst: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Regression/offset/noise of x_dst | x_src, from adjacent-slice blocks."""
    s_src = symmetrize(proc.cov_block(src, src))
    cross = proc.cov_block(dst, src)  # Cov(x_dst, x_src)
    eigs = np.linalg.eigvalsh(s_src)
    if eigs[0] < SINGULARITY_FLOOR * max(eigs[-1], 0.0) or eigs[-1] <= 0.0:
        raise SingularMatrixError(f"slice covariance at index {src} is singular")
    a = np.linalg.solve(s_src.T, cross.T).T
    c = symmetrize(symmetrize(proc.cov_block(dst, dst)) - a @ cross.T)
    b = proc.mean_at(dst) - a @ proc.mean_at(src)
    return a, b, c


def markov_project(proc: DiscreteGaussProcess, direction: str) -> DiscreteGaussProcess:
    """Markov chain with the input's marginals and adjacent transitions.

    Per-time means and covariances are reproduced exactly; only the
    longer-range cross blocks change (chained through the one-step
    regressions, composed in time order).
    """
    d = proc.dim
    n = proc.grid.n_slices
    cov = np.array(proc.joint_cov)
    if direction == "forward":
        pairs = [(k, k + 1) for k in range(n - 1)]
        tag: Tag = "markov_forward"
    elif direction == "backward":
        pairs = [(k + 1, k) for k in range(n - 2, -1, -1)]
        tag = "markov_backward"
    else:
        raise ValueError(f"unknown direction {direction!r}")
    regr = {}
    for src, dst in pairs:
        a, _, _ = _transition(proc, src, dst)
        regr[(src, dst)] = a
    if direction == "forward":
        for i in range(n):
            run = symmetrize(proc.cov_block(i, i))
            for j in range(i + 1, n):
                run = regr[(j - 1, j)] @ run  # Cov(x_j, x_i)
                cov[j * d:(j + 1) * d, i * d:(i + 1) * d] = run
                cov[i * d:(i + 1) * d, j * d:(j + 1) * d] = run.T
    else:
        for j in range(n - 1, -1, -1):
            run = symmetrize(proc.cov_block(j, j))
            for i in range(j - 1, -1, -1):
                run = regr[(i + 1, i)] @ run  # Cov(x_i, x_j)
                cov[i * d:(i + 1) * d, j * d:(j + 1) * d] = run
                cov[j * d:(j + 1) * d, i * d:(i + 1) * d] = run.T
    return DiscreteGaussProcess(proc.grid, d, proc.joint_mean.copy(),
                                symmetrize(cov), tag=tag)


def ipf_project(proc: DiscreteGaussProcess, which: str,
                problem: MatrixProblem) -> DiscreteGaussProcess:
    """Replace the starting marginal of a Markov process by the target.

    `which` = "pin0" requires a forward-parameterized process and pins the
    time-0 marginal to p0; "pin1" requires backward parameterization and
    pins time-1 to p1.  Transition conditionals are reused unchanged, so
    the pinned marginal matches the target bitwise and the rest of the
    chain is re-propagated through them.
    """
    d = proc.dim
    n = proc.grid.n_slices
    if which == "pin0":
        if proc.tag != "markov_forward":
            raise ValueError("pin0 requires a forward-parameterized Markov process")
        order = list(range(n))
        target = problem.p0
    elif which == "pin1":
        if proc.tag != "markov_backward":
            raise ValueError("pin1 requires a backward-parameterized Markov process")
        order = list(range(n - 1, -1, -1))
        target = problem.p1
    else:
        raise ValueError(f"unknown pin {which!r}")
    mean = np.zeros(n * d)
    cov = np.zeros((n * d, n * d))
    head = order[0]
    mean[head * d:(head + 1) * d] = target.mean
    cov[head * d:(head + 1) * d, head * d:(head + 1) * d] = target.covariance
    for step in range(1, n):
        prev, cur = order[step - 1], order[step]
        a, b, c = _transition(proc, prev, cur)
        mean[cur * d:(cur + 1) * d] = a @ mean[prev * d:(prev + 1) * d] + b
        for placed in order[:step]:
            blk = a @ cov[prev * d:(prev + 1) * d, placed * d:(placed + 1) * d]
            cov[cur * d:(cur + 1) * d, placed * d:(placed + 1) * d] = blk
            cov[placed * d:(placed + 1) * d, cur * d:(cur + 1) * d] = blk.T
        own = a @ cov[prev * d:(prev + 1) * d, prev * d:(prev + 1) * d] @ a.T + c
        cov[cur * d:(cur + 1) * d, cur * d:(cur + 1) * d] = symmetrize(own)
    return DiscreteGaussProcess(proc.grid, d, mean, symmetrize(cov), tag=proc.tag)


def ipmf_round_nd(joint: JointGaussian, problem: MatrixProblem) -> JointGaussian:
    """One full round on the endpoint coupling, returning it pinned at p0.

    reciprocal -> (backward Markov + pin to p1) -> reciprocal ->
    (forward Markov + pin to p0).
    """
    proc = reciprocal_project(joint, problem)
    proc = ipf_project(markov_project(proc, "backward"), "pin1", problem)
    proc = reciprocal_project(proc.endpoint_joint(), problem)
    proc = ipf_project(markov_project(proc, "forward"), "pin0", problem)
    return proc.endpoint_joint()


def sb_oracle(problem: MatrixProblem, tol: float = 1e-12,
              max_rounds: int = 10000) -> JointGaussian:
    """Static-bridge endpoint joint via fixed-point iteration.

    Iterates full rounds from the independent p0 x p1 coupling until
    successive joints differ by less than `tol` in max-norm over blocks.
    """
    joint = make_start(problem, StartCoupling("imf"))
    prev = joint.full_cov
    prev_mean = joint.full_mean
    for _ in range(max_rounds):
        joint = ipmf_round_nd(joint, problem)
        cur = joint.full_cov
        cur_mean = joint.full_mean
        delta = max(float(np.max(np.abs(cur - prev))),
                    float(np.max(np.abs(cur_mean - prev_mean))))
        if delta < tol:
            return joint
        prev, prev_mean = cur, cur_mean
    raise ConvergenceError(
        f"fixed-point iteration did not reach {tol} in {max_rounds} rounds")


def optimality_certificate(joint: JointGaussian, epsilon: float) -> float:
    """Max-norm distance of the negated precision cross block from I/eps.

    Zero exactly at the static-bridge solution between the joint's own
    marginals.
    """
    cross = precision_cross_block(joint)
    return float(np.max(np.abs(cross - np.eye(joint.dim) / epsilon)))
