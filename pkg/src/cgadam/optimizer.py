"""Conjugate-gradient-like Adam: state machine, coefficient kernel, direction.

The update loop per step t (gamma_1 = 0):

    d_t = g_t - (gamma_t / t**a) * d_{t-1}
    m_t = beta1_t * m_{t-1} + (1 - beta1_t) * d_t,   m_hat = m_t / (1 - beta11**t)
    v_t = beta2 * v_{t-1} + (1 - beta2) * d_t**2,    v_hat = v_t / (1 - beta2**t)
    vmax = max(vmax, v_hat)                          (elementwise, persistent)
    x  -= alpha_t * m_hat / sqrt(vmax + eps)

gamma_t comes from one of the classical nonlinear-CG formulas (HS, FR, PRP,
DY, HZ) evaluated on (g_t, g_{t-1}, d_{t-1}); "none" forces gamma = 0 which
reduces the optimizer to bias-corrected AMSGrad. Denominators smaller than
denom_guard trigger a restart (gamma = 0).
"""

from dataclasses import dataclass
from typing import Callable, Optional, Sequence, Tuple, Union

import numpy as np

from . import kernels
from .errors import ConfigurationError, NonFiniteError

METHODS = ("hs", "fr", "prp", "dy", "hz", "none")


@dataclass
class HyperParams:
    """Tunables of the CG-like update loop; also reused by the baselines."""

    alpha0: float = 1e-3
    lr_exponent: float = 0.0          # b in alpha_t = alpha0 / t**b
    beta1: Union[float, Callable[[int], float]] = 0.9
    beta2: float = 0.999
    a: float = 1.0 + 1e-5
    epsilon: float = 1e-8
    method: str = "fr"
    lam: float = 2.0                  # HZ only
    denom_guard: float = 1e-12
    # optional parameter groups: gamma computed per (start, stop) slice
    group_slices: Optional[Tuple[Tuple[int, int], ...]] = None

    def __post_init__(self):
        if self.alpha0 <= 0:
            raise ConfigurationError("alpha0 must be positive")
        if not 0.0 <= self.lr_exponent < 1.0:
            raise ConfigurationError("lr_exponent must be in [0, 1)")
        if not 0.0 < self.beta2 < 1.0:
            raise ConfigurationError("beta2 must be in (0, 1)")
        if self.a < 0.5:
            raise ConfigurationError("a must be >= 1/2")
        if self.epsilon < 0:
            raise ConfigurationError("epsilon must be nonnegative")
        if self.method not in METHODS:
            raise ConfigurationError(f"unknown method {self.method!r}")
        if self.method == "hz" and self.lam <= 0.25:
            raise ConfigurationError("lam must be > 1/4 for HZ")
        if self.denom_guard <= 0:
            raise ConfigurationError("denom_guard must be positive")
        if not callable(self.beta1) and not 0.0 <= self.beta1 < 1.0:
            raise ConfigurationError("beta1 must be in [0, 1)")

    def beta1_at(self, t: int) -> float:
        b = self.beta1(t) if callable(self.beta1) else self.beta1
        if not 0.0 <= b < 1.0:
            raise ConfigurationError(f"beta1 schedule left [0,1) at t={t}")
        return b

    @property
    def beta11(self) -> float:
        return self.beta1_at(1)

    def alpha_at(self, t: int) -> float:
        if self.lr_exponent == 0.0:
            return self.alpha0
        return self.alpha0 / t ** self.lr_exponent


@dataclass
class OptimizerState:
    """Mutable per-run state; one instance per trajectory."""

    x: np.ndarray
    m: np.ndarray
    v: np.ndarray
    v_hat_max: np.ndarray
    d_prev: np.ndarray
    g_prev: np.ndarray
    t: int = 1

    @classmethod
    def fresh(cls, x0: Sequence[float]) -> "OptimizerState":
        x = np.array(x0, dtype=np.float64)
        if x.ndim != 1 or x.size == 0:
            raise ConfigurationError("x0 must be a nonempty 1-D vector")
        if not np.all(np.isfinite(x)):
            raise NonFiniteError("x0 contains non-finite values")
        z = np.zeros_like(x)
        return cls(x=x, m=z.copy(), v=z.copy(), v_hat_max=z.copy(),
                   d_prev=z.copy(), g_prev=z.copy(), t=1)

    @property
    def dim(self) -> int:
        return self.x.shape[0]


@dataclass
class StepOutput:
    """Audit record of one step; arrays are safe-to-keep copies or
    freshly allocated buffers not mutated by later steps."""

    gamma: float
    d: np.ndarray
    m_hat: np.ndarray
    v_hat: np.ndarray          # bias-corrected, before the running max
    v_hat_max: np.ndarray      # after the running max
    update: np.ndarray
    gammas: Optional[np.ndarray] = None   # per-group mode only


def reset(state: OptimizerState, x0: Sequence[float]) -> OptimizerState:
    """Reinitialize in place to the start of a run at x0."""
    fresh = OptimizerState.fresh(x0)
    if state.dim != fresh.dim:
        raise ConfigurationError(
            f"reset dimension {fresh.dim} != state dimension {state.dim}")
    state.x = fresh.x
    state.m = fresh.m
    state.v = fresh.v
    state.v_hat_max = fresh.v_hat_max
    state.d_prev = fresh.d_prev
    state.g_prev = fresh.g_prev
    state.t = 1
    return state


def conjugate_coefficient(method: str, g: np.ndarray, g_prev: np.ndarray,
                          d_prev: np.ndarray, lam: float = 2.0,
                          guard: float = 1e-12) -> float:
    """Scalar conjugate coefficient; 0 on restart (guarded denominator)."""
    if method not in METHODS:
        raise ConfigurationError(f"unknown method {method!r}")
    if method == "none":
        return 0.0
    if g.shape != g_prev.shape or g.shape != d_prev.shape:
        raise ConfigurationError("conjugate_coefficient: shape mismatch")
    if not (np.all(np.isfinite(g)) and np.all(np.isfinite(g_prev))
            and np.all(np.isfinite(d_prev))):
        raise NonFiniteError("conjugate_coefficient: non-finite input")
    gy, dy, gg, pp, yy, gd = kernels.ACTIVE.conj_dots(g, g_prev, d_prev)
    if method == "fr":
        return gg / pp if abs(pp) >= guard else 0.0
    if method == "prp":
        return gy / pp if abs(pp) >= guard else 0.0
    if abs(dy) < guard:
        return 0.0
    if method == "hs":
        return gy / dy
    if method == "dy":
        return gg / dy
    # hz
    return gy / dy - lam * yy * gd / (dy * dy)


def cg_like_direction(g: np.ndarray, d_prev: np.ndarray, gamma: float,
                      t: int, a: float) -> np.ndarray:
    """d_t = g - (gamma / t**a) * d_prev; the damping decays the memory."""
    if t < 1:
        raise ConfigurationError("t must be >= 1")
    if gamma == 0.0:
        return g.copy()
    d = g - (gamma / t ** a) * d_prev
    if not np.all(np.isfinite(d)):
        raise NonFiniteError("direction is non-finite")
    return d


def _check_gradient(state: OptimizerState, g: np.ndarray) -> np.ndarray:
    g = np.asarray(g, dtype=np.float64)
    if g.shape != state.x.shape:
        raise ConfigurationError(
            f"gradient dimension {g.shape} != state dimension {state.x.shape}")
    if not np.all(np.isfinite(g)):
        raise NonFiniteError(f"non-finite gradient at t={state.t}")
    return g


def _direction_coefs(state, g, hp, rectify):
    """(scalar gamma, per-group gamma array or None) for the current step."""
    t = state.t
    if t == 1 or hp.method == "none":
        return 0.0, None
    if hp.group_slices is None:
        gamma = conjugate_coefficient(hp.method, g, state.g_prev,
                                      state.d_prev, hp.lam, hp.denom_guard)
        return gamma, None
    gammas = np.empty(len(hp.group_slices))
    for k, (lo, hi) in enumerate(hp.group_slices):
        gammas[k] = conjugate_coefficient(
            hp.method, g[lo:hi], state.g_prev[lo:hi], state.d_prev[lo:hi],
            hp.lam, hp.denom_guard)
    return float(np.mean(gammas)), gammas


def _apply_moments(state, d, beta1t, bc1, bc2, alpha_t, hp,
                   correct_first=True, correct_second=True, use_max=True):
    dim = state.dim
    m_hat = np.empty(dim)
    v_hat = np.empty(dim)
    update = np.empty(dim)
    kernels.ACTIVE.fused_step(
        state.x, state.m, state.v, state.v_hat_max, d,
        beta1t, hp.beta2, bc1, bc2, alpha_t, hp.epsilon,
        correct_first, correct_second, use_max, m_hat, v_hat, update)
    if not np.all(np.isfinite(state.x)):
        raise NonFiniteError(f"iterate became non-finite at t={state.t}")
    return m_hat, v_hat, update


def step(state: OptimizerState, g, hp: HyperParams, *,
         rectify: bool = True) -> StepOutput:
    """Advance the state by one step on gradient g; returns the audit record.

    rectify=False drops the 1/t**a damping (the plain CG direction), kept
    only so the harness can demonstrate that the undamped variant misbehaves.
    """
    g = _check_gradient(state, g)
    t = state.t
    gamma, gammas = _direction_coefs(state, g, hp, rectify)
    scale = 1.0 if not rectify else t ** -hp.a
    if gammas is None:
        d = g - (gamma * scale) * state.d_prev
    else:
        d = g.copy()
        for k, (lo, hi) in enumerate(hp.group_slices):
            d[lo:hi] -= (gammas[k] * scale) * state.d_prev[lo:hi]
    if not np.all(np.isfinite(d)):
        raise NonFiniteError(f"direction is non-finite at t={t}")

    beta1t = hp.beta1_at(t)
    bc1 = 1.0 - hp.beta11 ** t
    bc2 = 1.0 - hp.beta2 ** t
    m_hat, v_hat, update = _apply_moments(
        state, d, beta1t, bc1, bc2, hp.alpha_at(t), hp)

    state.g_prev = g.copy()
    state.d_prev = d
    state.t = t + 1
    return StepOutput(gamma=gamma, d=d, m_hat=m_hat, v_hat=v_hat,
                      v_hat_max=state.v_hat_max.copy(), update=update,
                      gammas=gammas)
