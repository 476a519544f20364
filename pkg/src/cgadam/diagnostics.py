"""Trajectory-level checks of the convergence machinery.

Closed-form scalars per step t (beta11 = beta1 schedule at t=1):

    xi_t  = (1 - beta11**t) - beta1_t * (1 - beta11**(t-1))
    eta_t = beta1_t * (1 - beta11**(t-1)) / xi_t
    mu_t  = alpha_t * (1 - beta1_t) / xi_t
    h(t)  = (1 - beta11**(t-1)) * (1 - beta11**(t+1)) / (1 - beta11**t)**2
    tau_t = min_k alpha_t / sqrt(vmax_{t,k})      (epsilon excluded)

The ledger accumulates the right-hand-side sums of the convergence bound
along a run (mu-weighted stepsize drift, squared preconditioned step
energy, the damped-coefficient sum) together with the left-hand-side
integrand evaluated with the exact gradient.
"""

import csv
import math
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .errors import ConfigurationError
from .optimizer import HyperParams, OptimizerState, StepOutput


@dataclass
class TheoryScalars:
    t: int
    xi_t: float
    eta_t: Optional[float]
    mu_t: float
    h_t: float
    tau_t: float
    gamma_decay_t: float
    beta1_t: float


@dataclass
class CheckResult:
    name: str
    ok: bool
    worst_t: Optional[int] = None
    margin: float = math.inf
    note: str = ""

    @property
    def status(self) -> str:
        return "pass" if self.ok else "fail"


def theory_scalars(hp: HyperParams, state_view: OptimizerState,
                   alpha_t: float, gamma_t: float, *,
                   want_eta: bool = True) -> TheoryScalars:
    """Scalars for the step the state has just completed (t = state.t - 1).

    tau uses the live running-max second moment, epsilon excluded.
    """
    t = state_view.t - 1
    if t < 1:
        raise ConfigurationError("state has not taken a step yet")
    b11 = hp.beta11
    b1t = hp.beta1_at(t)
    xi = (1.0 - b11 ** t) - b1t * (1.0 - b11 ** (t - 1))
    eta = None
    if want_eta:
        if b11 == 0.5:
            raise ConfigurationError(
                "eta diagnostics require beta11 != 1/2")
        eta = b1t * (1.0 - b11 ** (t - 1)) / xi
    mu = alpha_t * (1.0 - b1t) / xi
    h = ((1.0 - b11 ** (t - 1)) * (1.0 - b11 ** (t + 1))
         / (1.0 - b11 ** t) ** 2) if b11 > 0.0 else 1.0
    vmax = state_view.v_hat_max
    with np.errstate(divide="ignore"):
        tau = float(np.min(alpha_t / np.sqrt(vmax)))
    decay = alpha_t * abs(gamma_t) / t ** hp.a
    return TheoryScalars(t=t, xi_t=xi, eta_t=eta, mu_t=mu, h_t=h,
                         tau_t=tau, gamma_decay_t=decay, beta1_t=b1t)


def coupled_iterate(x: np.ndarray, x_prev: np.ndarray,
                    eta_t: float) -> np.ndarray:
    """The proof's auxiliary sequence x + eta * (x - x_prev), for inspection."""
    return x + eta_t * (x - x_prev)


def check_lemma_bounds(series: Sequence[TheoryScalars],
                       hp: HyperParams) -> List[CheckResult]:
    """Range bounds on xi/eta plus the per-step eta monotonicity branches.

    Precondition: the beta1 schedule is nonincreasing over the series. When
    it is not, all checks are skipped and marked "precondition unmet".
    """
    b11 = hp.beta11
    betas = [s.beta1_t for s in series]
    if any(b2 > b1 + 1e-15 for b1, b2 in zip(betas, betas[1:])):
        return [CheckResult("lemma_bounds", False,
                            note="precondition unmet: beta1 not nonincreasing")]
    out = []

    lo = (1.0 - b11) ** 2
    worst = min(series, key=lambda s: min(s.xi_t - lo, 1.0 - s.xi_t))
    m = min(worst.xi_t - lo, 1.0 - worst.xi_t)
    out.append(CheckResult("xi_range", m >= -1e-12, worst.t, m))

    if all(s.eta_t is not None for s in series):
        hi = 1.0 / (1.0 - b11)
        worst = min(series, key=lambda s: min(s.eta_t, hi - s.eta_t))
        m = min(worst.eta_t, hi - worst.eta_t)
        out.append(CheckResult("eta_range", m >= -1e-12, worst.t, m))

        # per-step branch: beta1(t+1) <=(>=) beta1_t*h(t) => eta(t+1) <=(>=) eta_t
        bad_t, margin = None, math.inf
        for s, s_next in zip(series, series[1:]):
            ref = s.beta1_t * s.h_t
            if s_next.beta1_t <= ref + 1e-15:
                viol = s_next.eta_t - s.eta_t           # must be <= 0
                if viol > 1e-12 and viol > -margin:
                    bad_t, margin = s.t, -viol
            if s_next.beta1_t >= ref - 1e-15:
                viol = s.eta_t - s_next.eta_t           # must be <= 0
                if viol > 1e-12 and viol > -margin:
                    bad_t, margin = s.t, -viol
        out.append(CheckResult("eta_monotone_branch", bad_t is None,
                               bad_t, margin))
    return out


def check_direction_bound(d_norms: Sequence[float], gammas: Sequence[float],
                          a: float, H: float) -> CheckResult:
    """Uniform direction bound: find the first step t0 after which the
    damped coefficient stays <= 1/2, take Hbar = max(2H, pre-t0 norms),
    and require every direction norm <= Hbar."""
    if len(d_norms) != len(gammas):
        raise ConfigurationError("d_norms and gammas must align")
    n = len(d_norms)
    t0 = 1
    for t in range(1, n + 1):
        if abs(gammas[t - 1]) / t ** a > 0.5:
            t0 = t + 1
    h_bar = 2.0 * H
    if t0 > 1:
        h_bar = max(h_bar, max(d_norms[:t0 - 1]))
    margin = math.inf
    worst_t = None
    ok = True
    for t, dn in enumerate(d_norms, start=1):
        m = h_bar - dn
        if m < margin:
            margin, worst_t = m, t
        if m < -1e-9 * max(1.0, h_bar):
            ok = False
    return CheckResult("direction_bound", ok, worst_t, margin,
                       note=f"t0={t0} Hbar={h_bar:.6g}")


@dataclass
class BoundLedger:
    """Running sums of the convergence bound's terms along one trajectory."""

    sum_mu_drift: float = 0.0
    sum_step_energy: float = 0.0
    sum_gamma_decay: float = 0.0
    sum_tau: float = 0.0
    lhs_sum: float = 0.0
    min_grad_sq_so_far: float = math.inf
    max_abs_gamma: float = 0.0
    steps: int = 0
    _prev_weighted: Optional[np.ndarray] = None

    def as_dict(self):
        return {
            "sum_mu_drift": self.sum_mu_drift,
            "sum_step_energy": self.sum_step_energy,
            "sum_gamma_decay": self.sum_gamma_decay,
            "sum_tau": self.sum_tau,
            "lhs_sum": self.lhs_sum,
            "min_grad_sq_so_far": self.min_grad_sq_so_far,
        }


def accumulate_ledger(ledger: BoundLedger, scalars: TheoryScalars,
                      step_out: StepOutput, exact_grad: np.ndarray,
                      alpha_t: float) -> BoundLedger:
    """Fold one step into the ledger (epsilon excluded throughout)."""
    vmax = step_out.v_hat_max
    inv_root = 1.0 / np.sqrt(vmax)
    weighted = scalars.mu_t * inv_root
    if ledger._prev_weighted is not None:
        ledger.sum_mu_drift += float(np.sum(np.abs(
            weighted - ledger._prev_weighted)))
    ledger._prev_weighted = weighted
    ledger.sum_step_energy += float(alpha_t ** 2 * np.sum(
        step_out.d * step_out.d / vmax))
    ledger.sum_gamma_decay += scalars.gamma_decay_t
    ledger.sum_tau += scalars.tau_t
    g = np.asarray(exact_grad, dtype=np.float64)
    ledger.lhs_sum += float(alpha_t * np.sum(g * g * inv_root))
    ledger.min_grad_sq_so_far = min(ledger.min_grad_sq_so_far,
                                    float(g @ g))
    ledger.max_abs_gamma = max(ledger.max_abs_gamma, abs(step_out.gamma))
    ledger.steps += 1
    return ledger


def rate_check(samples: Sequence[Tuple[int, float]],
               b: float) -> CheckResult:
    """Surrogate for the ln(T)/T**(1-b) rate on a run with alpha_t ~ t**-b.

    samples are (T, min-gradient-norm-squared-up-to-T) pairs at increasing
    T. Reports the least-squares slope of log(min_grad_sq) against
    log(ln T / T**(1-b)) and whether the ratio min_grad_sq * T**(1-b)/ln T
    stops growing over the last decade of T.
    """
    pts = [(T, v) for T, v in samples if T >= 2 and v > 0.0]
    if len(pts) < 5:
        return CheckResult("rate_surrogate", False,
                           note="inconclusive: fewer than 5 usable samples")
    Ts = np.array([p[0] for p in pts], dtype=np.float64)
    vs = np.array([p[1] for p in pts], dtype=np.float64)
    if np.ptp(np.log(vs)) < 1e-9:
        return CheckResult("rate_surrogate", False,
                           note="inconclusive: min-gradient sequence is flat")
    envelope = np.log(np.log(Ts)) - (1.0 - b) * np.log(Ts)
    slope = float(np.polyfit(envelope, np.log(vs), 1)[0])
    ratio = vs * Ts ** (1.0 - b) / np.log(Ts)
    last = ratio[Ts >= Ts[-1] / 10.0]
    growing = bool(np.all(np.diff(last) > 0.0)) and len(last) >= 3
    bounded = float(last[-1]) <= float(np.max(ratio)) + 1e-12
    ok = bounded and not growing
    return CheckResult("rate_surrogate", ok, int(Ts[-1]),
                       float(np.max(last)),
                       note=f"slope={slope:.3f}")


def write_report_csv(checks: Sequence[CheckResult], path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["name", "status", "worst_t", "margin"])
        for c in checks:
            writer.writerow([c.name, c.status,
                             "" if c.worst_t is None else c.worst_t,
                             format(c.margin, ".9g")])


def format_report(checks: Sequence[CheckResult]) -> str:
    lines = []
    for c in checks:
        extra = f" ({c.note})" if c.note else ""
        lines.append(f"{c.status.upper():4s} {c.name} "
                     f"worst_t={c.worst_t} margin={c.margin:.3g}{extra}")
    return "\n".join(lines)
