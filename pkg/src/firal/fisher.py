"""Fisher information aggregation and the inverse-trace design objective.

All matrices here live in the vectorized parameter space of dimension
``d_tilde = d(c-1)``.  Dense forms are used throughout; pools in scope are
a few thousand points and ``d_tilde`` stays well below a few hundred.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .model import _as_theta, _batch_weight_matrices, class_probabilities

# Eigenvalues below EIG_FLOOR_REL times the largest are clamped to that
# floor before inversion; the clamp event is surfaced to callers.
EIG_FLOOR_REL = 1e-12


def eigh_clamped(A, rel_floor=EIG_FLOOR_REL):
    """Symmetric eigendecomposition with a relative eigenvalue floor.

    Returns ``(w, V, clamped)`` where ``w`` has every eigenvalue below
    ``rel_floor * max(w)`` raised to that floor.
    """
    A = np.asarray(A, dtype=float)
    w, V = np.linalg.eigh(0.5 * (A + A.T))
    lam_max = max(float(w[-1]), 0.0)
    floor = rel_floor * lam_max
    clamped = bool(np.any(w < floor)) or lam_max == 0.0
    return np.maximum(w, floor), V, clamped


def _check_pd(w, context):
    if w[-1] <= 0 or w[0] <= EIG_FLOOR_REL * w[-1]:
        raise np.linalg.LinAlgError(
            f"{context}: matrix is singular to working precision "
            f"(min/max eigenvalue {w[0]:.3e}/{w[-1]:.3e})"
        )


def inv_sqrt_psd(A, strict=False):
    """Inverse matrix square root via symmetric eigendecomposition.

    With ``strict=True`` a near-singular input raises instead of being
    clamped.  Returns ``(S, clamped)`` with ``S = A^{-1/2}``.
    """
    w, V, clamped = eigh_clamped(A)
    if strict:
        _check_pd(w, "inv_sqrt_psd")
    if w[0] <= 0:
        raise np.linalg.LinAlgError("inv_sqrt_psd: matrix has no positive spectrum")
    S = (V / np.sqrt(w)) @ V.T
    return 0.5 * (S + S.T), clamped


def inv_psd(A):
    """Inverse of a symmetric positive definite matrix, symmetrized."""
    w, V, _ = eigh_clamped(A)
    _check_pd(w, "inv_psd")
    M = (V / w) @ V.T
    return 0.5 * (M + M.T)


def point_fishers(X, theta):
    """Stack of per-point Fisher matrices, shape ``(m, d_tilde, d_tilde)``."""
    theta = _as_theta(theta)
    X = np.asarray(X, dtype=float)
    W = _batch_weight_matrices(class_probabilities(X, theta))
    k, d = theta.shape
    m = len(X)
    F = np.einsum("iab,ip,iq->iapbq", W, X, X).reshape(m, k * d, k * d)
    return F


def pool_hessian(X, theta):
    """Average Fisher information over a pool: ``(1/m) sum_i H(x_i)``."""
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or len(X) < 1:
        raise ValueError("pool must be a nonempty (m, d) array")
    theta = _as_theta(theta)
    W = _batch_weight_matrices(class_probabilities(X, theta))
    k, d = theta.shape
    H = np.einsum("iab,ip,iq->apbq", W, X, X).reshape(k * d, k * d)
    H /= len(X)
    return 0.5 * (H + H.T)


def labeled_shift(X0, theta, budget):
    """Shared shift from the labeled points: ``(1/budget) sum H(x', theta)``.

    An empty labeled set yields the zero matrix.
    """
    theta = _as_theta(theta)
    k, d = theta.shape
    X0 = np.asarray(X0, dtype=float).reshape(-1, d)
    if len(X0) == 0:
        return np.zeros((k * d, k * d))
    return pool_hessian(X0, theta) * (len(X0) / float(budget))


def shifted_fisher(x, theta, shift):
    """Candidate information matrix: per-point Fisher plus the shared shift."""
    from .model import point_fisher

    F = point_fisher(x, theta)
    shift = np.asarray(shift, dtype=float)
    if shift.shape != F.shape:
        raise ValueError(f"shift shape {shift.shape} != fisher shape {F.shape}")
    return F + shift


def shifted_fishers(X, theta, shift):
    """Stack of shifted candidate matrices for a whole pool."""
    F = point_fishers(X, theta)
    shift = np.asarray(shift, dtype=float)
    if shift.shape != F.shape[1:]:
        raise ValueError(f"shift shape {shift.shape} != fisher shape {F.shape[1:]}")
    return F + shift[None, :, :]


def fir(Hq, Hp):
    """Fisher information ratio ``Trace(Hq^{-1} Hp)`` via Cholesky solves.

    Raises ``LinAlgError`` when ``Hq`` is singular to working precision.
    """
    Hq = np.asarray(Hq, dtype=float)
    Hp = np.asarray(Hp, dtype=float)
    w = np.linalg.eigvalsh(0.5 * (Hq + Hq.T))
    _check_pd(w, "fir")
    c, low = scipy.linalg.cho_factor(Hq)
    return float(np.trace(scipy.linalg.cho_solve((c, low), Hp)))


def f_objective(weights_or_indices, fishers, Hp0):
    """Design objective ``<(sum_i z_i H(x_i))^{-1}, Hp0>``.

    ``weights_or_indices`` is either a length-``m`` real weight vector or
    an integer index sequence (a multiset; repeated indices accumulate).
    """
    fishers = np.asarray(fishers, dtype=float)
    z = np.asarray(weights_or_indices)
    if z.dtype.kind in "iu":
        if z.ndim != 1 or (z.size and (z.min() < 0 or z.max() >= len(fishers))):
            raise ValueError("index set entries must lie in [0, m)")
        z = np.bincount(z, minlength=len(fishers)).astype(float)
    else:
        z = z.astype(float)
        if z.shape != (len(fishers),):
            raise ValueError("weights must have one entry per candidate")
    sigma = np.einsum("i,ijk->jk", z, fishers)
    return fir(sigma, Hp0)


def sigma_max(Hq, Hp):
    """Largest eigenvalue of ``Hq^{-1/2} Hp Hq^{-1/2}``."""
    S, _ = inv_sqrt_psd(Hq, strict=True)
    M = S @ np.asarray(Hp, dtype=float) @ S
    return float(np.linalg.eigvalsh(0.5 * (M + M.T))[-1])


@dataclass
class WhitenedFactors:
    """Factored candidate matrices after whitening by the relaxed design.

    In whitened coordinates every candidate decomposes as
    ``shift_w + factors[i] @ factors[i].T`` and the weighted sum over the
    design weights equals the identity (up to ``identity_residual``).
    """

    shift_w: np.ndarray        # (d_tilde, d_tilde) shared PSD part
    factors: np.ndarray        # (m, d_tilde, c-1) tall per-point factors
    sigma: np.ndarray          # aggregate sum_i z_i H(x_i)
    inv_sqrt_sigma: np.ndarray
    weights: np.ndarray        # the whitening weights z
    identity_residual: float
    clamped: bool

    @property
    def d_tilde(self):
        return self.shift_w.shape[0]

    @property
    def n_candidates(self):
        return self.factors.shape[0]

    def candidate(self, i):
        """Dense whitened candidate matrix for index ``i``."""
        P = self.factors[i]
        return self.shift_w + P @ P.T


def whiten_factors(z, X, theta, shift):
    """Whiten the candidate matrices by the weighted aggregate.

    Given weights ``z`` (summing to the budget), forms
    ``sigma = sum_i z_i (F_i + shift)`` and returns the shared shift and
    per-point tall factors conjugated by ``sigma^{-1/2}``.  The per-point
    factor is ``sigma^{-1/2} (Q_i kron x_i)`` where ``Q_i Q_i^T``
    reproduces the ``(c-1, c-1)`` curvature factor at ``x_i``.
    """
    theta = _as_theta(theta)
    X = np.asarray(X, dtype=float)
    z = np.asarray(z, dtype=float)
    if z.shape != (len(X),):
        raise ValueError("one weight per pool point required")
    k, d = theta.shape
    dt = k * d
    shift = np.asarray(shift, dtype=float)
    if shift.shape != (dt, dt):
        raise ValueError(f"shift must be ({dt}, {dt})")

    W = _batch_weight_matrices(class_probabilities(X, theta))
    wW, VW = np.linalg.eigh(W)
    Q = VW * np.sqrt(np.maximum(wW, 0.0))[:, None, :]  # (m, k, k)

    F = np.einsum("iab,ip,iq->iapbq", W, X, X).reshape(len(X), dt, dt)
    sigma = np.einsum("i,ijk->jk", z, F) + z.sum() * shift
    sigma = 0.5 * (sigma + sigma.T)
    S, clamped = inv_sqrt_psd(sigma)

    shift_w = S @ shift @ S
    shift_w = 0.5 * (shift_w + shift_w.T)
    # (Q_i kron x_i) has rows indexed class-major to match theta.ravel().
    raw = np.einsum("iab,ip->iapb", Q, X).reshape(len(X), dt, k)
    factors = np.einsum("st,itk->isk", S, raw)

    resid = float(np.abs(S @ sigma @ S - np.eye(dt)).max())
    return WhitenedFactors(
        shift_w=shift_w,
        factors=factors,
        sigma=sigma,
        inv_sqrt_sigma=S,
        weights=z,
        identity_residual=resid,
        clamped=clamped,
    )
