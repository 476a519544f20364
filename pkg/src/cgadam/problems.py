"""Deterministic test objectives with exact gradients, plus noise wrapping.

Every oracle bundles f, its hand-derived gradient, and whatever problem
constants are known (Lipschitz constant, gradient bound, lower bound).
NoisyOracle adds unbiased spherical Gaussian noise and then clips the sum
radially so the bounded-gradient contract holds by construction; the draw
at step t depends only on (seed, t).
"""

import csv
import math
from dataclasses import dataclass
from typing import Callable, Optional, Tuple

import numpy as np

from .errors import ConfigurationError, ContractViolationError


@dataclass
class GradientOracle:
    dim: int
    eval: Callable[[np.ndarray], float]
    grad: Callable[[np.ndarray], np.ndarray]
    name: str = "oracle"
    lipschitz_L: Optional[float] = None
    grad_bound_H: Optional[float] = None
    lower_bound: Optional[float] = None
    # classification problems only
    accuracy: Optional[Callable[[np.ndarray], float]] = None
    eval_batch: Optional[Callable[[np.ndarray, np.ndarray], float]] = None
    grad_batch: Optional[Callable[[np.ndarray, np.ndarray], np.ndarray]] = None
    n_samples: int = 0
    dataset: Optional[Tuple[np.ndarray, np.ndarray]] = None


@dataclass
class NoisyOracle:
    base: GradientOracle
    noise_scale: float
    clip_H: float
    seed: int

    def __post_init__(self):
        if self.noise_scale < 0:
            raise ConfigurationError("noise_scale must be nonnegative")
        if self.clip_H <= 0:
            raise ConfigurationError("clip_H must be positive")


def noisy_gradient(oracle: NoisyOracle, x: np.ndarray, t: int) -> np.ndarray:
    """grad(x) + seeded Gaussian noise, radially clipped to norm <= clip_H."""
    g = np.asarray(oracle.base.grad(x), dtype=np.float64)
    gn = float(np.linalg.norm(g))
    if gn > oracle.clip_H:
        raise ContractViolationError(
            f"exact gradient norm {gn:.3g} exceeds clip_H={oracle.clip_H}; "
            "the bounded-gradient contract cannot hold at this point")
    if oracle.noise_scale == 0.0:
        return g
    rng = np.random.default_rng((int(oracle.seed) & 0xFFFFFFFFFFFFFFFF, t))
    g = g + oracle.noise_scale * rng.standard_normal(g.shape[0])
    norm = float(np.linalg.norm(g))
    if norm > oracle.clip_H:
        g *= oracle.clip_H / norm
    return g


def quadratic(dim: int, condition: float = 1.0) -> GradientOracle:
    """f(x) = 1/2 sum c_k x_k**2 with c_k log-spaced in [1, condition]."""
    if dim < 1:
        raise ConfigurationError("dim must be >= 1")
    if condition < 1.0:
        raise ConfigurationError("condition must be >= 1")
    c = np.logspace(0.0, math.log10(condition), dim) if condition > 1 \
        else np.ones(dim)

    def f(x):
        x = np.asarray(x, dtype=np.float64)
        return float(0.5 * np.sum(c * x * x))

    def g(x):
        return c * np.asarray(x, dtype=np.float64)

    return GradientOracle(dim=dim, eval=f, grad=g, name="quadratic",
                          lipschitz_L=float(c[-1]), lower_bound=0.0)


def rosenbrock(dim: int) -> GradientOracle:
    """Chained Rosenbrock on coordinate pairs; minimum 0 at all-ones."""
    if dim < 2 or dim % 2 != 0:
        raise ConfigurationError("dim must be even and >= 2")

    def f(x):
        x = np.asarray(x, dtype=np.float64)
        a = x[0::2]
        b = x[1::2]
        return float(np.sum(100.0 * (b - a * a) ** 2 + (1.0 - a) ** 2))

    def g(x):
        x = np.asarray(x, dtype=np.float64)
        a = x[0::2]
        b = x[1::2]
        out = np.empty_like(x)
        out[0::2] = -400.0 * a * (b - a * a) - 2.0 * (1.0 - a)
        out[1::2] = 200.0 * (b - a * a)
        return out

    return GradientOracle(dim=dim, eval=f, grad=g, name="rosenbrock",
                          lower_bound=0.0)


def _sigmoid(z):
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def logistic_regression(n_samples: int, dim: int,
                        seed: int = 0) -> GradientOracle:
    """Mean logistic loss on a synthetic near-separable dataset."""
    if n_samples < 1 or dim < 1:
        raise ConfigurationError("n_samples and dim must be >= 1")
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((n_samples, dim))
    w_true = rng.standard_normal(dim)
    w_true /= np.linalg.norm(w_true)
    margin = X @ w_true + 0.3 * rng.standard_normal(n_samples)
    s = np.where(margin >= 0.0, 1.0, -1.0)   # labels in {-1, +1}
    y01 = (s > 0).astype(int)

    def f(w):
        z = s * (X @ np.asarray(w, dtype=np.float64))
        # log(1 + exp(-z)), stable
        return float(np.mean(np.logaddexp(0.0, -z)))

    def g(w):
        z = s * (X @ np.asarray(w, dtype=np.float64))
        r = -s * _sigmoid(-z)
        return (X.T @ r) / n_samples

    def f_batch(w, idx):
        z = s[idx] * (X[idx] @ np.asarray(w, dtype=np.float64))
        return float(np.mean(np.logaddexp(0.0, -z)))

    def g_batch(w, idx):
        z = s[idx] * (X[idx] @ np.asarray(w, dtype=np.float64))
        r = -s[idx] * _sigmoid(-z)
        return (X[idx].T @ r) / len(idx)

    def acc(w):
        pred = (X @ np.asarray(w, dtype=np.float64)) >= 0.0
        return float(np.mean(pred == (s > 0)))

    return GradientOracle(dim=dim, eval=f, grad=g, name="logreg",
                          lower_bound=0.0, accuracy=acc,
                          eval_batch=f_batch, grad_batch=g_batch,
                          n_samples=n_samples, dataset=(X, y01))


def _two_moons(seed: int, n: int = 200, noise: float = 0.08):
    rng = np.random.default_rng(seed)
    half = n // 2
    th0 = rng.uniform(0.0, math.pi, half)
    upper = np.column_stack([np.cos(th0), np.sin(th0)])
    th1 = rng.uniform(0.0, math.pi, n - half)
    lower = np.column_stack([1.0 - np.cos(th1), 0.5 - np.sin(th1)])
    X = np.vstack([upper, lower]) + noise * rng.standard_normal((n, 2))
    y = np.concatenate([np.zeros(half, dtype=int),
                        np.ones(n - half, dtype=int)])
    return X, y


def tiny_mlp(hidden: int, seed: int = 0) -> GradientOracle:
    """2-layer tanh MLP with softmax cross-entropy on a two-moons set.

    200 points, 2 classes; parameters are the flat vector
    [W1 (2*h), b1 (h), W2 (h*2), b2 (2)], gradient by hand-coded backprop.
    """
    if not 1 <= hidden <= 64:
        raise ConfigurationError("hidden must be in [1, 64]")
    X, y = _two_moons(seed)
    n = len(y)
    h = hidden
    dim = 5 * h + 2

    def unpack(w):
        w = np.asarray(w, dtype=np.float64)
        if w.shape != (dim,):
            raise ConfigurationError(f"parameter vector must have length {dim}")
        i = 0
        W1 = w[i:i + 2 * h].reshape(2, h); i += 2 * h
        b1 = w[i:i + h]; i += h
        W2 = w[i:i + 2 * h].reshape(h, 2); i += 2 * h
        b2 = w[i:i + 2]
        return W1, b1, W2, b2

    def forward(w, idx):
        W1, b1, W2, b2 = unpack(w)
        Xb = X[idx]
        hid = np.tanh(Xb @ W1 + b1)
        z = hid @ W2 + b2
        z = z - z.max(axis=1, keepdims=True)
        e = np.exp(z)
        p = e / e.sum(axis=1, keepdims=True)
        return Xb, hid, p, W2

    def loss_on(w, idx):
        _, _, p, _ = forward(w, idx)
        return float(-np.mean(np.log(p[np.arange(len(idx)), y[idx]])))

    def grad_on(w, idx):
        Xb, hid, p, W2 = forward(w, idx)
        nb = len(idx)
        dz = p.copy()
        dz[np.arange(nb), y[idx]] -= 1.0
        dz /= nb
        gW2 = hid.T @ dz
        gb2 = dz.sum(axis=0)
        dh = (dz @ W2.T) * (1.0 - hid * hid)
        gW1 = Xb.T @ dh
        gb1 = dh.sum(axis=0)
        return np.concatenate([gW1.ravel(), gb1, gW2.ravel(), gb2])

    full = np.arange(n)

    def acc(w):
        _, _, p, _ = forward(w, full)
        return float(np.mean(p.argmax(axis=1) == y))

    return GradientOracle(
        dim=dim, eval=lambda w: loss_on(w, full),
        grad=lambda w: grad_on(w, full), name="tiny_mlp",
        accuracy=acc,
        eval_batch=lambda w, idx: loss_on(w, np.asarray(idx)),
        grad_batch=lambda w, idx: grad_on(w, np.asarray(idx)),
        n_samples=n, dataset=(X, y))


def check_gradient(oracle: GradientOracle, x, h: float = 1e-5) -> float:
    """Max relative error of grad(x) vs central differences of eval."""
    if h <= 0:
        raise ConfigurationError("h must be positive")
    x = np.asarray(x, dtype=np.float64)
    ana = np.asarray(oracle.grad(x), dtype=np.float64)
    num = np.empty_like(ana)
    for k in range(x.shape[0]):
        e = np.zeros_like(x)
        e[k] = h
        num[k] = (oracle.eval(x + e) - oracle.eval(x - e)) / (2.0 * h)
    scale = max(1.0, float(np.max(np.abs(ana))))
    return float(np.max(np.abs(num - ana)) / scale)


def export_dataset_csv(oracle: GradientOracle, path) -> None:
    """Write the 2-D synthetic dataset as (x1, x2, label) rows."""
    if oracle.dataset is None:
        raise ConfigurationError(f"{oracle.name} has no dataset to export")
    X, y = oracle.dataset
    if X.shape[1] != 2:
        raise ConfigurationError(
            f"{oracle.name} dataset has {X.shape[1]} features; "
            "export supports 2-D features only")
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["x1", "x2", "label"])
        for row, label in zip(X, y):
            writer.writerow([format(row[0], ".17g"), format(row[1], ".17g"),
                             int(label)])
