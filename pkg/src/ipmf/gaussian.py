"""Exact Gaussian algebra: marginals, joints, conditioning, divergences.

All types are immutable values and all operations are pure functions, so
everything here is safe to use from concurrent workers.  Covariance
matrices are re-symmetrized after every product chain to stop floating
point drift from violating the type invariants downstream.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "SingularMatrixError",
    "Gaussian1D",
    "GaussianND",
    "JointGaussian",
    "GaussianConditional",
    "condition",
    "compose",
    "kl_gaussian",
    "bw2",
    "precision_cross_block",
]

# A covariance counts as numerically singular when its smallest eigenvalue
# drops below this fraction of the largest one (scale-invariant floor).
SINGULARITY_FLOOR = 1e-12

# Eigenvalues above this (negative) threshold are treated as rounding noise
# when a PSD matrix square root is required.
PSD_EIGENVALUE_SLACK = -1e-10

_SYMMETRY_TOL = 1e-12


class SingularMatrixError(ValueError):
    """A covariance matrix required to be invertible is numerically singular."""


def symmetrize(matrix: np.ndarray) -> np.ndarray:
    """Return (M + M^T)/2; cheap insurance after matrix product chains."""
    return 0.5 * (matrix + matrix.T)


def _as_readonly(arr: np.ndarray) -> np.ndarray:
    out = np.array(arr, dtype=float)
    out.setflags(write=False)
    return out


def _check_symmetric(matrix: np.ndarray, name: str) -> None:
    scale = max(1.0, float(np.max(np.abs(matrix))))
    if np.max(np.abs(matrix - matrix.T)) > _SYMMETRY_TOL * scale:
        raise ValueError(f"{name} is not symmetric within tolerance")


def _check_singularity(cov: np.ndarray, what: str) -> None:
    eigs = np.linalg.eigvalsh(cov)
    if eigs[0] < SINGULARITY_FLOOR * max(eigs[-1], 0.0) or eigs[-1] <= 0.0:
        raise SingularMatrixError(f"{what} is numerically singular")


@dataclass(frozen=True)
class Gaussian1D:
    """Scalar normal distribution N(mean, variance)."""

    mean: float
    variance: float

    def __post_init__(self) -> None:
        if not self.variance > 0.0:
            raise ValueError("variance must be strictly positive")

    @property
    def std(self) -> float:
        return float(np.sqrt(self.variance))


@dataclass(frozen=True)
class GaussianND:
    """Multivariate normal N(mean, covariance) with SPD covariance."""

    mean: np.ndarray
    covariance: np.ndarray

    def __post_init__(self) -> None:
        mean = _as_readonly(np.atleast_1d(self.mean))
        cov = _as_readonly(np.atleast_2d(self.covariance))
        if cov.shape != (mean.size, mean.size):
            raise ValueError("mean/covariance shape mismatch")
        _check_symmetric(cov, "covariance")
        if np.linalg.eigvalsh(cov)[0] <= 0.0:
            raise ValueError("covariance must be positive definite")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "covariance", cov)

    @property
    def dim(self) -> int:
        return self.mean.size

    @classmethod
    def from_1d(cls, g: Gaussian1D) -> "GaussianND":
        return cls(np.array([g.mean]), np.array([[g.variance]]))


@dataclass(frozen=True)
class JointGaussian:
    """Endpoint coupling q(x0, x1) as a block-structured 2D x 2D Gaussian.

    Blocks: cov00 = Cov(x0), cov11 = Cov(x1), cov01 = Cov(x0, x1); the
    transposed block cov10 is implied.  The full block matrix must be PSD
    (min eigenvalue >= -1e-10 relative to scale).
    """

    mean0: np.ndarray
    mean1: np.ndarray
    cov00: np.ndarray
    cov11: np.ndarray
    cov01: np.ndarray

    def __post_init__(self) -> None:
        m0 = _as_readonly(np.atleast_1d(self.mean0))
        m1 = _as_readonly(np.atleast_1d(self.mean1))
        c00 = _as_readonly(np.atleast_2d(self.cov00))
        c11 = _as_readonly(np.atleast_2d(self.cov11))
        c01 = _as_readonly(np.atleast_2d(self.cov01))
        d = m0.size
        if m1.size != d or c00.shape != (d, d) or c11.shape != (d, d) or c01.shape != (d, d):
            raise ValueError("inconsistent block shapes")
        _check_symmetric(c00, "cov00")
        _check_symmetric(c11, "cov11")
        full = np.block([[c00, c01], [c01.T, c11]])
        eigs = np.linalg.eigvalsh(symmetrize(full))
        scale = max(eigs[-1], 1.0)
        if eigs[0] < PSD_EIGENVALUE_SLACK * scale:
            raise ValueError("joint covariance is not positive semidefinite")
        for name, val in (("mean0", m0), ("mean1", m1), ("cov00", c00),
                          ("cov11", c11), ("cov01", c01)):
            object.__setattr__(self, name, val)

    @property
    def dim(self) -> int:
        return self.mean0.size

    @property
    def full_mean(self) -> np.ndarray:
        return np.concatenate([self.mean0, self.mean1])

    @property
    def full_cov(self) -> np.ndarray:
        return symmetrize(np.block([[self.cov00, self.cov01],
                                    [self.cov01.T, self.cov11]]))

    def marginal0(self) -> GaussianND:
        return GaussianND(self.mean0, self.cov00)

    def marginal1(self) -> GaussianND:
        return GaussianND(self.mean1, self.cov11)

    @property
    def correlation(self) -> float:
        """Scalar correlation; only defined for the 1D specialization."""
        if self.dim != 1:
            raise ValueError("correlation is defined for 1D joints only")
        return float(self.cov01[0, 0]
                     / np.sqrt(self.cov00[0, 0] * self.cov11[0, 0]))

    @classmethod
    def from_correlation_1d(cls, mean0: float, std0: float, mean1: float,
                            std1: float, rho: float) -> "JointGaussian":
        return cls(np.array([mean0]), np.array([mean1]),
                   np.array([[std0 * std0]]), np.array([[std1 * std1]]),
                   np.array([[rho * std0 * std1]]))


@dataclass(frozen=True)
class GaussianConditional:
    """Linear-Gaussian conditional x' | x ~ N(A x + b, C)."""

    regression: np.ndarray
    offset: np.ndarray
    noise_cov: np.ndarray

    def __post_init__(self) -> None:
        a = _as_readonly(np.atleast_2d(self.regression))
        b = _as_readonly(np.atleast_1d(self.offset))
        c = _as_readonly(np.atleast_2d(self.noise_cov))
        d = b.size
        if a.shape != (d, d) or c.shape != (d, d):
            raise ValueError("inconsistent conditional shapes")
        _check_symmetric(c, "noise_cov")
        object.__setattr__(self, "regression", a)
        object.__setattr__(self, "offset", b)
        object.__setattr__(self, "noise_cov", c)


def condition(joint: JointGaussian, direction: str = "forward") -> GaussianConditional:
    """Closed-form conditional of a joint Gaussian.

    direction="forward" yields x1 | x0, "backward" yields x0 | x1.

    Raises
    ------
    SingularMatrixError
        If the conditioned-on marginal covariance, or the joint itself,
        is numerically singular (degenerate coupling, e.g. |rho| = 1).
    """
    if direction == "forward":
        given_cov, other_cov = joint.cov00, joint.cov11
        cross = joint.cov01.T  # Cov(x1, x0)
        given_mean, other_mean = joint.mean0, joint.mean1
    elif direction == "backward":
        given_cov, other_cov = joint.cov11, joint.cov00
        cross = joint.cov01  # Cov(x0, x1)
        given_mean, other_mean = joint.mean1, joint.mean0
    else:
        raise ValueError(f"unknown direction {direction!r}")
    _check_singularity(given_cov, "conditioned-on marginal covariance")
    _check_singularity(joint.full_cov, "joint covariance")
    a = np.linalg.solve(given_cov.T, cross.T).T  # cross @ given_cov^{-1}
    c = symmetrize(other_cov - a @ cross.T)
    b = other_mean - a @ given_mean
    return GaussianConditional(a, b, c)


def compose(start: GaussianND, cond: GaussianConditional) -> JointGaussian:
    """Joint of x ~ start and x' | x ~ cond (the inverse of `condition`)."""
    if cond.offset.size != start.dim:
        raise ValueError("conditional dimension does not match start marginal")
    a = cond.regression
    cov00 = start.covariance
    cov01 = symmetrize(cov00) @ a.T
    cov11 = symmetrize(a @ cov00 @ a.T) + cond.noise_cov
    mean1 = a @ start.mean + cond.offset
    return JointGaussian(start.mean, mean1, cov00, symmetrize(cov11), cov01)


def _mean_cov(p: GaussianND | JointGaussian) -> tuple[np.ndarray, np.ndarray]:
    if isinstance(p, JointGaussian):
        return p.full_mean, p.full_cov
    return p.mean, p.covariance


def kl_gaussian(p: GaussianND | JointGaussian, q: GaussianND | JointGaussian) -> float:
    """KL(p || q) between Gaussians in closed form, clamped at zero.

    KL = 0.5 [ tr(Sq^-1 Sp) + (mq-mp)^T Sq^-1 (mq-mp) - dim + ln det Sq/det Sp ].
    Tiny negative results (rounding near convergence) are clamped to 0.
    """
    mp, sp = _mean_cov(p)
    mq, sq = _mean_cov(q)
    if mp.size != mq.size:
        raise ValueError("dimension mismatch")
    _check_singularity(sq, "q covariance")
    d = mp.size
    try:
        lq = np.linalg.cholesky(sq)
    except np.linalg.LinAlgError as exc:
        raise SingularMatrixError("q covariance is not positive definite") from exc
    sol = np.linalg.solve(sq, sp)
    dm = mq - mp
    half = np.linalg.solve(lq, dm)
    quad = float(half @ half)
    logdet_q = 2.0 * float(np.sum(np.log(np.diag(lq))))
    sign_p, logdet_p = np.linalg.slogdet(sp)
    if sign_p <= 0.0:
        raise SingularMatrixError("p covariance is not positive definite")
    kl = 0.5 * (float(np.trace(sol)) + quad - d + logdet_q - float(logdet_p))
    return max(kl, 0.0)


def _psd_sqrt(matrix: np.ndarray, what: str) -> np.ndarray:
    """Symmetric PSD square root; tiny negative eigenvalues are clamped."""
    eigs, vecs = np.linalg.eigh(symmetrize(matrix))
    scale = max(float(eigs[-1]), 1.0)
    if eigs[0] < PSD_EIGENVALUE_SLACK * scale:
        raise SingularMatrixError(f"{what} is not positive semidefinite")
    eigs = np.clip(eigs, 0.0, None)
    return symmetrize((vecs * np.sqrt(eigs)) @ vecs.T)


def bw2(p: GaussianND, q: GaussianND) -> float:
    """Squared Bures-Wasserstein distance between Gaussians.

    ||mp - mq||^2 + tr(Sp + Sq - 2 (Sq^{1/2} Sp Sq^{1/2})^{1/2});
    symmetric and zero iff p == q.
    """
    if p.dim != q.dim:
        raise ValueError("dimension mismatch")
    rq = _psd_sqrt(q.covariance, "q covariance")
    inner = _psd_sqrt(rq @ p.covariance @ rq, "coupling matrix")
    dm = p.mean - q.mean
    val = float(dm @ dm) + float(np.trace(p.covariance) + np.trace(q.covariance)
                                 - 2.0 * np.trace(inner))
    return max(val, 0.0)


def precision_cross_block(joint: JointGaussian) -> np.ndarray:
    """Negated (0, 1) block of the inverse of the full joint covariance.

    For a 1D joint this equals rho / (s s' (1 - rho^2)), the coefficient
    coupling x0 and x1 in the joint density's exponent; at the static
    bridge solution the D-dimensional block equals I/epsilon.
    """
    full = joint.full_cov
    _check_singularity(full, "joint covariance")
    prec = np.linalg.inv(full)
    d = joint.dim
    return -prec[:d, d:]
