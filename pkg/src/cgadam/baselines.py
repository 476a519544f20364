"""Reference optimizers sharing the OptimizerState/StepOutput interface.

All of them are instances of the same moment/update pass with different
conventions:

    generic_adam  raw gradient direction, no bias corrections, no max
    adam          raw gradient direction, both corrections, no max
    amsgrad       raw gradient direction, no corrections, running max
    amsgrad_bc    raw gradient direction, both corrections, running max
                  (trajectory-identical to CG-like-Adam with method "none")
    coba          d_t = g_t - M * gamma_t * d_{t-1}, both corrections, max;
                  an approximation of the constant-damping variant, flagged
                  as such in run metadata.

The correct_first/correct_second overrides exist so tests can align bias
conventions between kinds (e.g. generic_adam with corrections on equals
plain adam for a constant beta1 schedule).
"""

from dataclasses import dataclass
from typing import Optional

from .errors import ConfigurationError
from .optimizer import (HyperParams, OptimizerState, StepOutput,
                        _apply_moments, _check_gradient, _direction_coefs)

KINDS = ("generic_adam", "adam", "amsgrad", "amsgrad_bc", "coba")

# tag -> (correct_first, correct_second, use_max)
_CONVENTIONS = {
    "generic_adam": (False, False, False),
    "adam": (True, True, False),
    "amsgrad": (False, False, True),
    "amsgrad_bc": (True, True, True),
    "coba": (True, True, True),
}


@dataclass
class BaselineKind:
    tag: str
    coba_M: float = 1e-4
    correct_first: Optional[bool] = None
    correct_second: Optional[bool] = None

    def __post_init__(self):
        if self.tag not in KINDS:
            raise ConfigurationError(f"unknown baseline {self.tag!r}")
        if self.tag == "coba" and self.coba_M <= 0:
            raise ConfigurationError("coba_M must be positive")

    def conventions(self):
        cf, cs, um = _CONVENTIONS[self.tag]
        if self.correct_first is not None:
            cf = self.correct_first
        if self.correct_second is not None:
            cs = self.correct_second
        return cf, cs, um


def baseline_step(kind: BaselineKind, state: OptimizerState, g,
                  hp: HyperParams) -> StepOutput:
    """One step of the selected baseline; same contract as optimizer.step."""
    g = _check_gradient(state, g)
    t = state.t
    if kind.tag == "coba":
        gamma, gammas = _direction_coefs(state, g, hp, rectify=True)
        if gammas is None:
            d = g - (kind.coba_M * gamma) * state.d_prev
        else:
            d = g.copy()
            for k, (lo, hi) in enumerate(hp.group_slices):
                d[lo:hi] -= (kind.coba_M * gammas[k]) * state.d_prev[lo:hi]
    else:
        gamma, gammas = 0.0, None
        d = g.copy()

    cf, cs, um = kind.conventions()
    beta1t = hp.beta1_at(t)
    bc1 = 1.0 - hp.beta11 ** t
    bc2 = 1.0 - hp.beta2 ** t
    m_hat, v_hat, update = _apply_moments(
        state, d, beta1t, bc1, bc2, hp.alpha_at(t), hp,
        correct_first=cf, correct_second=cs, use_max=um)

    state.g_prev = g.copy()
    state.d_prev = d
    state.t = t + 1
    return StepOutput(gamma=gamma, d=d, m_hat=m_hat, v_hat=v_hat,
                      v_hat_max=state.v_hat_max.copy(), update=update,
                      gammas=gammas)
