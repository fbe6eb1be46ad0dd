"""Multinomial logistic regression: likelihood, derivatives, and Newton ERM.

The parameter matrix ``theta`` has shape ``(c - 1, d)`` for a ``c``-class
model on ``d``-dimensional features.  Class ``c`` is the reference class
with an implicit zero logit, so only ``c - 1`` rows are free.  Labels are
1-based integers in ``{1, ..., c}`` throughout, matching the CSV dataset
format (columns ``x_1..x_d, y``).

Parameters are vectorized row-major, i.e. ``theta.ravel()`` stacks the
class rows.  Under that convention the per-point loss Hessian is the
Kronecker product ``(diag(h) - h h^T) kron (x x^T)`` where ``h`` holds the
first ``c - 1`` class probabilities.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# Probabilities are floored before taking logs so the loss stays finite
# even for logits of magnitude several hundred.
PROB_FLOOR = 1e-300


def _as_theta(theta):
    theta = np.asarray(theta, dtype=float)
    if theta.ndim != 2:
        raise ValueError(f"theta must be (c-1, d), got shape {theta.shape}")
    return theta


def class_probabilities(X, theta):
    """Softmax class probabilities for a batch of points.

    Parameters
    ----------
    X : ndarray of shape (n, d)
    theta : ndarray of shape (c-1, d)

    Returns
    -------
    ndarray of shape (n, c), rows nonnegative and summing to 1.
    """
    theta = _as_theta(theta)
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[1] != theta.shape[1]:
        raise ValueError(
            f"feature dimension mismatch: X has shape {X.shape}, "
            f"theta has shape {theta.shape}"
        )
    logits = X @ theta.T
    # Reference class logit is 0; subtract the max for overflow safety.
    z = np.concatenate([logits, np.zeros((X.shape[0], 1))], axis=1)
    z -= z.max(axis=1, keepdims=True)
    p = np.exp(z)
    p /= p.sum(axis=1, keepdims=True)
    return p


def predict_proba(x, theta):
    """Class probabilities for a single point, length ``c``."""
    x = np.asarray(x, dtype=float)
    if x.ndim != 1:
        raise ValueError(f"x must be a vector, got shape {x.shape}")
    return class_probabilities(x[None, :], theta)[0]


def _check_label(y, n_classes):
    y = int(y)
    if not 1 <= y <= n_classes:
        raise ValueError(f"label {y} outside 1..{n_classes}")
    return y


def nll_loss(x, y, theta):
    """Negative log-likelihood of label ``y`` (1-based) at ``theta``."""
    p = predict_proba(x, theta)
    y = _check_label(y, p.size)
    return -np.log(max(p[y - 1], PROB_FLOOR))


def loss_gradient(x, y, theta):
    """Gradient of the per-example loss, shape ``(c-1, d)``.

    Row ``i`` equals ``beta_i * x`` with ``beta_i = -1{y=i} + h_i(x)``.
    """
    theta = _as_theta(theta)
    x = np.asarray(x, dtype=float)
    p = predict_proba(x, theta)
    y = _check_label(y, p.size)
    beta = p[:-1].copy()
    if y <= theta.shape[0]:
        beta[y - 1] -= 1.0
    return np.outer(beta, x)


def point_weight_matrix(x, theta):
    """The ``(c-1, c-1)`` curvature factor ``diag(h) - h h^T`` at ``x``."""
    h = predict_proba(x, theta)[:-1]
    return np.diag(h) - np.outer(h, h)


def point_fisher(x, theta):
    """Per-point Fisher information, a PSD matrix of size ``d(c-1)``.

    Equals ``(diag(h) - h h^T) kron (x x^T)``; independent of any label.
    """
    x = np.asarray(x, dtype=float)
    w = point_weight_matrix(x, theta)
    return np.kron(w, np.outer(x, x))


def _batch_weight_matrices(P):
    """``diag(h) - h h^T`` for every row of a probability matrix ``P``."""
    h = P[:, :-1]
    k = h.shape[1]
    W = -np.einsum("ia,ib->iab", h, h)
    idx = np.arange(k)
    W[:, idx, idx] += h
    return W


def empirical_loss(X, y, theta, ridge=0.0):
    """Mean negative log-likelihood plus ``ridge/2 * ||theta||_F^2``."""
    P = class_probabilities(X, theta)
    y = np.asarray(y, dtype=int)
    pk = np.maximum(P[np.arange(len(y)), y - 1], PROB_FLOOR)
    loss = -np.mean(np.log(pk))
    if ridge > 0:
        loss += 0.5 * ridge * float(np.sum(theta**2))
    return loss


def empirical_gradient(X, y, theta, ridge=0.0):
    """Gradient of :func:`empirical_loss`, shape ``(c-1, d)``."""
    theta = _as_theta(theta)
    P = class_probabilities(X, theta)
    B = P[:, :-1].copy()
    y = np.asarray(y, dtype=int)
    in_free = y <= theta.shape[0]
    B[np.nonzero(in_free)[0], y[in_free] - 1] -= 1.0
    g = B.T @ np.asarray(X, dtype=float) / len(y)
    if ridge > 0:
        g = g + ridge * theta
    return g


def empirical_hessian(X, theta, ridge=0.0):
    """Hessian of :func:`empirical_loss` over vectorized parameters.

    Size ``d(c-1) x d(c-1)``; label independent.
    """
    theta = _as_theta(theta)
    X = np.asarray(X, dtype=float)
    P = class_probabilities(X, theta)
    W = _batch_weight_matrices(P)
    k, d = theta.shape
    H = np.einsum("iab,ip,iq->apbq", W, X, X).reshape(k * d, k * d)
    H /= len(X)
    if ridge > 0:
        H = H + ridge * np.eye(k * d)
    return H


@dataclass
class FitResult:
    """Outcome of :func:`fit_erm`.

    ``converged`` is False when the gradient tolerance was not reached
    within ``max_iter`` Newton steps; the best iterate is still returned.
    ``loss_history`` holds the objective after every accepted step.
    """

    theta: np.ndarray
    converged: bool
    n_iter: int
    grad_norm: float
    loss: float
    loss_history: list


def fit_erm(X, y, n_classes, ridge=1e-8, tol=1e-8, max_iter=100):
    """Empirical risk minimization by damped Newton iteration.

    Full-Hessian Newton with Armijo backtracking (c = 1e-4, step halving).
    Deterministic given its inputs; the objective is non-increasing across
    iterations.  Exhausting ``max_iter`` is reported via the result flag,
    not raised.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=int)
    if X.ndim != 2 or len(X) != len(y):
        raise ValueError("X must be (n, d) with one label per row")
    if not np.all(np.isfinite(X)):
        raise ValueError("non-finite feature values")
    if len(X) < 1:
        raise ValueError("need at least one example")
    if np.any(y < 1) or np.any(y > n_classes):
        raise ValueError(f"labels outside 1..{n_classes}")
    if ridge < 0:
        raise ValueError("ridge must be nonnegative")

    k, d = n_classes - 1, X.shape[1]
    theta = np.zeros((k, d))
    loss = empirical_loss(X, y, theta, ridge)
    grad = empirical_gradient(X, y, theta, ridge)
    gnorm = float(np.abs(grad).max())
    history = [loss]
    n_iter = 0

    for n_iter in range(1, max_iter + 1):
        if gnorm <= tol:
            return FitResult(theta, True, n_iter - 1, gnorm, loss, history)
        H = empirical_hessian(X, theta, ridge)
        step = _newton_step(H, grad.ravel()).reshape(k, d)

        # Armijo backtracking; reject any step that fails to decrease.
        slope = float(np.sum(grad * step))
        t = 1.0
        accepted = False
        while t >= 2.0**-40:
            cand = theta + t * step
            cand_loss = empirical_loss(X, y, cand, ridge)
            if not np.isfinite(cand_loss):
                raise ValueError("non-finite loss encountered during fit")
            if cand_loss <= loss + 1e-4 * t * slope:
                theta, loss = cand, cand_loss
                accepted = True
                break
            t *= 0.5
        if not accepted:
            break
        history.append(loss)
        grad = empirical_gradient(X, y, theta, ridge)
        gnorm = float(np.abs(grad).max())

    return FitResult(theta, gnorm <= tol, n_iter, gnorm, loss, history)


def _newton_step(H, g):
    """Solve ``H s = -g`` with escalating jitter if ``H`` is singular."""
    dim = H.shape[0]
    jitter = 0.0
    scale = max(float(np.trace(H)) / dim, 1e-30)
    for _ in range(8):
        try:
            L = np.linalg.cholesky(H + jitter * np.eye(dim))
        except np.linalg.LinAlgError:
            jitter = scale * 1e-12 if jitter == 0.0 else jitter * 100.0
            continue
        z = np.linalg.solve(L, -g)
        return np.linalg.solve(L.T, z)
    raise np.linalg.LinAlgError("Newton system could not be factorized")


def accuracy(X, y, theta):
    """Fraction of points whose argmax class matches the given labels."""
    P = class_probabilities(X, theta)
    pred = np.argmax(P, axis=1) + 1
    return float(np.mean(pred == np.asarray(y, dtype=int)))
