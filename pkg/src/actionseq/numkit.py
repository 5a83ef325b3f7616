"""Dense numerical primitives shared by every model in the package.

Everything here operates on plain float64 numpy arrays. The gradient
checker is the ground truth every hand-derived backward pass in this
package is verified against, so it deliberately knows nothing about the
models themselves: it only needs a callable mapping a flat parameter
vector to (loss, analytic gradient).
"""

from __future__ import annotations

from typing import Callable, Tuple

import numpy as np


class NonDeterministicLossError(RuntimeError):
    """Raised when a loss function returns different values for identical inputs."""


def sigmoid(x: np.ndarray) -> np.ndarray:
    """Numerically stable logistic function, exact for large |x|."""
    x = np.asarray(x, dtype=np.float64)
    z = np.exp(-np.abs(x))
    return np.where(x >= 0.0, 1.0 / (1.0 + z), z / (1.0 + z))


def softmax(v: np.ndarray) -> np.ndarray:
    """Probability vector exp(v_i) / sum_j exp(v_j), computed with max subtraction.

    Raises ValueError on empty or non-finite input. The output sums to 1
    within 1e-12 for any finite input, including components of magnitude 1e6.
    """
    v = np.asarray(v, dtype=np.float64)
    if v.size == 0:
        raise ValueError("softmax of an empty vector is undefined")
    if not np.all(np.isfinite(v)):
        raise ValueError("softmax input must be finite")
    e = np.exp(v - np.max(v))
    return e / np.sum(e)


def log_softmax(v: np.ndarray) -> np.ndarray:
    v = np.asarray(v, dtype=np.float64)
    if v.size == 0:
        raise ValueError("log_softmax of an empty vector is undefined")
    if not np.all(np.isfinite(v)):
        raise ValueError("log_softmax input must be finite")
    shifted = v - np.max(v)
    return shifted - np.log(np.sum(np.exp(shifted)))


def cross_entropy(scores: np.ndarray, target: int) -> float:
    """-log softmax(scores)[target], the per-step classification loss."""
    scores = np.asarray(scores, dtype=np.float64)
    if not 0 <= target < scores.size:
        raise ValueError(f"target index {target} out of range for {scores.size} scores")
    return float(-log_softmax(scores)[target])


def cross_entropy_grad(scores: np.ndarray, target: int) -> np.ndarray:
    """Gradient of cross_entropy w.r.t. the raw scores: softmax(scores) - onehot."""
    g = softmax(scores)
    if not 0 <= target < g.size:
        raise ValueError(f"target index {target} out of range for {g.size} scores")
    g[target] -= 1.0
    return g


def grad_check(
    loss_and_grad: Callable[[np.ndarray], Tuple[float, np.ndarray]],
    params: np.ndarray,
    eps: float = 1e-5,
) -> float:
    """Compare an analytic gradient against central finite differences.

    loss_and_grad maps a flat float64 parameter vector to (loss, gradient).
    For every coordinate i the numeric derivative
    (loss(p + eps*e_i) - loss(p - eps*e_i)) / (2*eps) is compared to the
    analytic one; the return value is the maximum of
    |analytic - numeric| / max(|analytic|, |numeric|, 1e-8).

    The loss function must be deterministic; two evaluations at the same
    point are compared bitwise and a NonDeterministicLossError is raised
    if they differ.
    """
    if not 0.0 < eps <= 1e-3:
        raise ValueError(f"eps must be in (0, 1e-3], got {eps}")
    params = np.asarray(params, dtype=np.float64)
    loss0, grad = loss_and_grad(params.copy())
    loss1, _ = loss_and_grad(params.copy())
    if loss0 != loss1:
        raise NonDeterministicLossError(
            f"loss function is not deterministic: {loss0!r} != {loss1!r}"
        )
    grad = np.asarray(grad, dtype=np.float64)
    if grad.shape != params.shape:
        raise ValueError(f"gradient shape {grad.shape} does not match params {params.shape}")

    worst = 0.0
    probe = params.copy()
    for i in range(params.size):
        orig = probe[i]
        probe[i] = orig + eps
        plus, _ = loss_and_grad(probe)
        probe[i] = orig - eps
        minus, _ = loss_and_grad(probe)
        probe[i] = orig
        numeric = (plus - minus) / (2.0 * eps)
        denom = max(abs(grad[i]), abs(numeric), 1e-8)
        worst = max(worst, abs(grad[i] - numeric) / denom)
    return worst
