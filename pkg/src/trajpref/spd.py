"""Symmetric positive definite matrix kernel.

Matrix logarithm and exponential through symmetric eigendecomposition,
shrinkage covariance estimation, the affine-invariant Frechet mean, and
projection onto the tangent space at a reference point. These are the
numeric primitives behind the covariance-based signal classifiers.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np

from .errors import (
    ConvergenceError,
    IllConditionedError,
    InsufficientDataError,
    NumericDomainError,
)

# Relative spectral floor for accepting a matrix as positive definite.
PD_RTOL = 1e-10

# Eigenvalues are clamped to this fraction of the largest eigenvalue before
# taking logarithms, which keeps log/sqrt well defined under roundoff.
LOG_CLAMP_RTOL = 1e-12


def _as_square(a, name: str = "matrix") -> np.ndarray:
    a = np.asarray(a, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise NumericDomainError(f"{name} must be square, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise NumericDomainError(f"{name} has non-finite entries")
    return a


class SPDMatrix:
    """A symmetric positive definite matrix with a validated spectrum.

    Input entries are symmetrized as ``(A + A.T) / 2`` on construction.
    The smallest eigenvalue must exceed ``PD_RTOL`` times the largest,
    otherwise :class:`NumericDomainError` is raised.

    Attributes
    ----------
    entries : ndarray, shape (n, n)
        The symmetrized matrix. Marked read-only.
    """

    __slots__ = ("entries",)

    def __init__(self, entries):
        a = _as_square(entries)
        a = 0.5 * (a + a.T)
        w = np.linalg.eigvalsh(a)
        if w[-1] <= 0.0 or w[0] <= PD_RTOL * w[-1]:
            raise NumericDomainError(
                "matrix is not positive definite: eigenvalues in "
                f"[{w[0]:.6e}, {w[-1]:.6e}]"
            )
        a.setflags(write=False)
        self.entries = a

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    def __repr__(self) -> str:
        return f"SPDMatrix(dim={self.dim})"


class TangentVector:
    """Coordinates of a tangent-space point at some reference matrix.

    The coordinates enumerate the upper triangle of the symmetric tangent
    matrix row by row, diagonal included, so an ``n x n`` matrix yields
    ``n * (n + 1) / 2`` entries.
    """

    __slots__ = ("dim", "entries")

    def __init__(self, dim: int, entries):
        v = np.asarray(entries, dtype=float)
        expected = dim * (dim + 1) // 2
        if v.ndim != 1 or v.shape[0] != expected:
            raise NumericDomainError(
                f"tangent vector for dim {dim} needs {expected} entries, "
                f"got shape {v.shape}"
            )
        if not np.all(np.isfinite(v)):
            raise NumericDomainError("tangent vector has non-finite entries")
        v.setflags(write=False)
        self.dim = dim
        self.entries = v

    def __repr__(self) -> str:
        return f"TangentVector(dim={self.dim})"


def _eigh_clamped(a: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Eigendecomposition of symmetric ``a`` (batched ok) with clamped spectrum."""
    w, v = np.linalg.eigh(a)
    top = w[..., -1:]
    floor = LOG_CLAMP_RTOL * np.maximum(top, 0.0)
    if np.any(top <= 0.0):
        raise NumericDomainError("matrix has no positive eigenvalue")
    w = np.maximum(w, floor)
    return w, v


def _sym_log(a: np.ndarray) -> np.ndarray:
    """Matrix log of (nearly) SPD symmetric ``a``, spectrum clamped from below."""
    w, v = _eigh_clamped(a)
    return (v * np.log(w)[..., None, :]) @ np.swapaxes(v, -1, -2)


def _sym_exp(a: np.ndarray) -> np.ndarray:
    """Matrix exp of symmetric ``a``; the spectrum may have any sign."""
    w, v = np.linalg.eigh(a)
    return (v * np.exp(w)[..., None, :]) @ np.swapaxes(v, -1, -2)


def matrix_log(mat: SPDMatrix) -> np.ndarray:
    """Principal matrix logarithm of a positive definite matrix.

    Computed through the eigendecomposition ``V diag(log w) V.T``.
    Eigenvalues are clamped from below at ``LOG_CLAMP_RTOL`` times the
    largest eigenvalue before the logarithm.

    Returns
    -------
    ndarray, shape (n, n)
        Symmetric matrix logarithm.
    """
    return _sym_log(mat.entries)


def matrix_exp(sym) -> SPDMatrix:
    """Matrix exponential of a symmetric matrix, returned as SPD.

    Inverse of :func:`matrix_log` up to roundoff.
    """
    a = _as_square(sym, "symmetric matrix")
    if not np.allclose(a, a.T, rtol=0.0, atol=1e-10 * max(1.0, np.abs(a).max())):
        raise NumericDomainError("matrix exponential input must be symmetric")
    a = 0.5 * (a + a.T)
    w, v = np.linalg.eigh(a)
    out = (v * np.exp(w)) @ v.T
    return SPDMatrix(out)


def matrix_inv_sqrt(mat: SPDMatrix) -> SPDMatrix:
    """Inverse square root ``M`` of a positive definite matrix.

    Satisfies ``M @ mat @ M ~ I``. Refuses inputs whose spectral condition
    number exceeds 1e12, where the defining identity degrades.
    """
    w, v = np.linalg.eigh(mat.entries)
    if w[0] <= 0.0 or w[-1] / w[0] > 1e12:
        raise IllConditionedError(
            f"spectral condition number exceeds 1e12 "
            f"(eigenvalues in [{w[0]:.6e}, {w[-1]:.6e}])"
        )
    return SPDMatrix((v / np.sqrt(w)) @ v.T)


def _invsqrt_sqrt(mat: SPDMatrix) -> tuple[np.ndarray, np.ndarray]:
    """Return (mat ** -0.5, mat ** 0.5) as symmetric arrays."""
    w, v = _eigh_clamped(mat.entries)
    s = np.sqrt(w)
    return (v / s) @ v.T, (v * s) @ v.T


def ledoit_wolf_cov(window: np.ndarray) -> SPDMatrix:
    """Shrinkage covariance of a multichannel window.

    Parameters
    ----------
    window : ndarray, shape (n_channels, n_samples)
        One signal epoch, channels in rows.

    Returns
    -------
    SPDMatrix
        ``(1 - a) * S + a * mu * I`` where ``S`` is the sample covariance
        over the time axis, ``mu = trace(S) / n_channels`` and the intensity
        ``a`` is the closed-form optimum for shrinking toward the scaled
        identity. Positive definite even when ``S`` is rank deficient.

    Raises
    ------
    InsufficientDataError
        If fewer than two time samples are given.
    NumericDomainError
        If the window is entirely zero (no scale to shrink toward).
    """
    x = np.asarray(window, dtype=float)
    if x.ndim != 2:
        raise NumericDomainError(f"window must be 2-d, got shape {x.shape}")
    if not np.all(np.isfinite(x)):
        raise NumericDomainError("window has non-finite entries")
    p, n = x.shape
    if n < 2:
        raise InsufficientDataError(f"need at least 2 samples, got {n}")

    xc = x - x.mean(axis=1, keepdims=True)
    emp = (xc @ xc.T) / n
    mu = np.trace(emp) / p
    if mu <= 0.0:
        raise NumericDomainError("window is identically constant, covariance has no scale")

    # Closed-form intensity: delta is the distance of S to mu * I, beta the
    # estimated variance of the S entries; both per the quadratic-loss optimum.
    delta_ = emp.copy()
    delta_.flat[:: p + 1] -= mu
    delta = (delta_ ** 2).sum() / p
    x2 = xc ** 2
    beta_ = 1.0 / (p * n) * ((x2 @ x2.T).sum() / n - (emp ** 2).sum())
    if delta <= 0.0:
        shrinkage = 1.0
    else:
        shrinkage = min(beta_, delta) / delta
    shrunk = (1.0 - shrinkage) * emp
    shrunk.flat[:: p + 1] += shrinkage * mu
    return SPDMatrix(shrunk)


def frechet_mean(
    mats: Sequence[SPDMatrix],
    tol: float = 1e-8,
    max_iter: int = 50,
) -> SPDMatrix:
    """Affine-invariant Frechet mean of positive definite matrices.

    Fixed-point iteration started at the arithmetic mean: at each step the
    inputs are whitened by the current estimate, their matrix logarithms are
    averaged, and the estimate moves along the exponential map,

    ``M <- M^1/2 expm(mean_i logm(M^-1/2 C_i M^-1/2)) M^1/2``.

    Iteration stops when the Frobenius norm of the averaged logarithm drops
    below ``tol``.

    Raises
    ------
    InsufficientDataError
        If the sequence is empty.
    ConvergenceError
        If ``max_iter`` steps do not reach ``tol``; the last iterate is
        attached to the exception.
    """
    if len(mats) == 0:
        raise InsufficientDataError("cannot average zero matrices")
    dims = {m.dim for m in mats}
    if len(dims) != 1:
        raise NumericDomainError(f"mixed matrix sizes: {sorted(dims)}")
    stack = np.stack([m.entries for m in mats])
    if len(mats) == 1:
        return mats[0]

    mean = SPDMatrix(stack.mean(axis=0))
    for _ in range(max_iter):
        inv_sqrt, sqrt = _invsqrt_sqrt(mean)
        whitened = inv_sqrt @ stack @ inv_sqrt
        whitened = 0.5 * (whitened + np.swapaxes(whitened, -1, -2))
        logs = _sym_log(whitened)
        step = logs.mean(axis=0)
        if np.linalg.norm(step, "fro") < tol:
            return mean
        # Step length from the Hessian bound of the Karcher cost: for points
        # at geodesic distance <= D the Hessian spectrum sits in
        # [1, q coth q] with q = D / sqrt(2), so 2 / (1 + q coth q) is the
        # optimal damped-gradient step. Tight clusters recover the unit step.
        dmax = np.linalg.norm(logs, axis=(-2, -1)).max()
        q = dmax / np.sqrt(2.0)
        hess_hi = q / np.tanh(q) if q > 1e-12 else 1.0
        nu = 2.0 / (1.0 + hess_hi)
        mean = SPDMatrix(sqrt @ _sym_exp(nu * step) @ sqrt)
    raise ConvergenceError(
        f"Frechet mean did not converge in {max_iter} iterations",
        last_iterate=mean,
    )


def tangent_project(
    mat: SPDMatrix,
    reference: SPDMatrix,
    weighted: bool = False,
) -> TangentVector:
    """Project an SPD matrix onto the tangent space at a reference point.

    Computes ``S = logm(R^-1/2 C R^-1/2)`` and returns the upper triangle of
    ``S`` row by row, diagonal included. With ``weighted=True`` the
    off-diagonal coordinates are multiplied by sqrt(2), which makes the
    Euclidean norm of the vector match the Frobenius norm of ``S``; the
    default keeps raw entries.

    Projecting the reference onto itself gives an exactly zero vector.
    """
    if mat.dim != reference.dim:
        raise NumericDomainError(
            f"dimension mismatch: {mat.dim} vs reference {reference.dim}"
        )
    n = mat.dim
    iu = np.triu_indices(n)
    if np.array_equal(mat.entries, reference.entries):
        return TangentVector(n, np.zeros(len(iu[0])))
    inv_sqrt, _ = _invsqrt_sqrt(reference)
    whitened = inv_sqrt @ mat.entries @ inv_sqrt
    whitened = 0.5 * (whitened + whitened.T)
    try:
        log = _sym_log(whitened)
    except NumericDomainError as exc:
        raise IllConditionedError(
            "whitened matrix lost positive definiteness; reference is too "
            "ill conditioned relative to the input"
        ) from exc
    coords = log[iu]
    if weighted:
        scale = np.where(iu[0] == iu[1], 1.0, np.sqrt(2.0))
        coords = coords * scale
    return TangentVector(n, coords)
