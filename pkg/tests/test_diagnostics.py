import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cgadam import HyperParams, OptimizerState, step
from cgadam.diagnostics import (BoundLedger, accumulate_ledger,
                                check_direction_bound, check_lemma_bounds,
                                coupled_iterate, format_report, rate_check,
                                theory_scalars, write_report_csv)
from cgadam.errors import ConfigurationError
from cgadam.problems import NoisyOracle, noisy_gradient, quadratic


def scalars_for_schedule(beta1, alpha0=1e-2, T=100, want_eta=True, a=1.0):
    """TheoryScalars series without running an optimizer: only the
    closed-form schedule quantities matter here."""
    hp = HyperParams(alpha0=alpha0, beta1=beta1, a=a)
    state = OptimizerState.fresh([1.0])
    state.v_hat_max[:] = 1.0
    out = []
    for t in range(1, T + 1):
        state.t = t + 1
        out.append(theory_scalars(hp, state, hp.alpha_at(t), 0.0,
                                  want_eta=want_eta))
    return out, hp


class TestTheoryScalars:
    def test_constant_beta1_closed_form(self):
        series, hp = scalars_for_schedule(0.9, T=50)
        for s in series:
            assert s.xi_t == pytest.approx(0.1, rel=1e-12)
            assert s.mu_t == pytest.approx(hp.alpha0, rel=1e-12)

    def test_zero_schedule_degenerate(self):
        series, _ = scalars_for_schedule(0.0, T=20)
        for s in series:
            assert s.xi_t == 1.0
            assert s.eta_t == 0.0
            assert s.h_t == 1.0

    def test_half_beta11_with_eta_rejected(self):
        hp = HyperParams(beta1=0.5)
        state = OptimizerState.fresh([1.0])
        state.t = 2
        with pytest.raises(ConfigurationError):
            theory_scalars(hp, state, 1e-2, 0.0, want_eta=True)
        # fine when eta is not requested
        s = theory_scalars(hp, state, 1e-2, 0.0, want_eta=False)
        assert s.eta_t is None

    def test_matches_log_space_rederivation(self):
        # independent recomputation of xi/eta/h via expm1/log1p
        beta11 = 0.95
        series, _ = scalars_for_schedule(0.95, T=10_000)
        lb = math.log(beta11)

        def one_minus_pow(t):
            return -math.expm1(t * lb)

        for s in series[:200] + series[::97]:
            t = s.t
            xi = one_minus_pow(t) - beta11 * one_minus_pow(t - 1)
            eta = beta11 * one_minus_pow(t - 1) / xi
            h = (one_minus_pow(t - 1) * one_minus_pow(t + 1)
                 / one_minus_pow(t) ** 2)
            assert s.xi_t == pytest.approx(xi, rel=1e-12, abs=1e-12)
            assert s.eta_t == pytest.approx(eta, rel=1e-12, abs=1e-12)
            assert s.h_t == pytest.approx(h, rel=1e-12, abs=1e-12)

    def test_tau_uses_min_coordinate(self):
        hp = HyperParams(alpha0=0.5, beta1=0.9)
        state = OptimizerState.fresh([0.0, 0.0])
        state.t = 2
        state.v_hat_max = np.array([4.0, 0.25])
        s = theory_scalars(hp, state, 0.5, 0.0)
        assert s.tau_t == pytest.approx(0.25)  # 0.5/sqrt(4)

    def test_gamma_decay(self):
        hp = HyperParams(alpha0=1.0, beta1=0.9, a=2.0)
        state = OptimizerState.fresh([1.0])
        state.v_hat_max[:] = 1.0
        state.t = 4
        s = theory_scalars(hp, state, 1.0, -6.0)
        assert s.gamma_decay_t == pytest.approx(6.0 / 9.0)


class TestLemmaBounds:
    @pytest.mark.parametrize("beta1", [0.9, lambda t: 0.9 / t, 0.0])
    def test_schedules_pass(self, beta1):
        series, hp = scalars_for_schedule(beta1, T=2000)
        results = check_lemma_bounds(series, hp)
        assert results and all(r.ok for r in results), format_report(results)

    def test_increasing_schedule_unmet_precondition(self):
        series, hp = scalars_for_schedule(lambda t: min(0.9, 0.1 * t), T=20)
        results = check_lemma_bounds(series, hp)
        assert len(results) == 1
        assert not results[0].ok
        assert "precondition unmet" in results[0].note

    def test_zero_schedule_bounds_tight(self):
        series, hp = scalars_for_schedule(0.0, T=100)
        results = {r.name: r for r in check_lemma_bounds(series, hp)}
        assert results["xi_range"].ok
        # xi = 1 everywhere: upper bound is tight
        assert results["xi_range"].margin == pytest.approx(0.0, abs=1e-15)


class TestDirectionBound:
    def test_gradient_only_trivial(self):
        d_norms = [1.0, 2.0, 1.5]
        res = check_direction_bound(d_norms, [0.0, 0.0, 0.0], a=1.0, H=2.0)
        assert res.ok

    def test_fr_on_noisy_quadratic(self):
        q = quadratic(6, 10.0)
        no = NoisyOracle(base=q, noise_scale=0.5, clip_H=10.0, seed=0)
        hp = HyperParams(alpha0=1e-2, method="fr", a=1.0 + 1e-5)
        rng = np.random.default_rng(0)
        state = OptimizerState.fresh(0.3 * rng.standard_normal(6))
        d_norms, gammas = [], []
        for t in range(1, 3001):
            out = step(state, noisy_gradient(no, state.x, t), hp)
            d_norms.append(float(np.linalg.norm(out.d)))
            gammas.append(out.gamma)
        res = check_direction_bound(d_norms, gammas, a=hp.a, H=10.0)
        assert res.ok, res.note

    def test_adversarial_alternating_stream(self):
        # worst-case damping exponent with sign-flipping gradients
        hp = HyperParams(alpha0=1e-3, method="fr", a=0.5)
        state = OptimizerState.fresh(np.ones(2))
        d_norms, gammas = [], []
        H = 0.0
        for t in range(1, 2001):
            g = ((-1.0) ** t) * np.array([1.0, -2.0]) * (1 + 0.5 * (t % 3))
            H = max(H, float(np.linalg.norm(g)))
            out = step(state, g, hp)
            d_norms.append(float(np.linalg.norm(out.d)))
            gammas.append(out.gamma)
        res = check_direction_bound(d_norms, gammas, a=0.5, H=H)
        assert res.ok, res.note

    def test_violation_detected(self):
        res = check_direction_bound([1.0, 50.0], [0.0, 0.0], a=1.0, H=2.0)
        assert not res.ok


def lemma11_lhs_rhs(a_seq, beta11):
    """Literal double-sum evaluation of the weighted-window inequality."""
    T = len(a_seq)
    csum = np.concatenate([[0.0], np.cumsum(a_seq)])  # csum[t] = sum a_1..a_t
    lhs = 0.0
    for t in range(1, T):
        i = np.arange(1, t + 1)
        b_t = np.sum(beta11 ** (t - i) * (csum[t] - csum[i]))
        lhs += b_t * b_t
    rhs = np.sum(np.asarray(a_seq[1:T - 1]) ** 2) / (1 - beta11) ** 4
    return lhs, rhs


class TestLemma11:
    @settings(max_examples=25, deadline=None)
    @given(st.integers(0, 10_000), st.sampled_from([0.5, 0.9, 0.0, 0.99]))
    def test_random_sequences(self, seed, beta11):
        rng = np.random.default_rng(seed)
        a_seq = rng.uniform(0.0, 3.0, 60)
        lhs, rhs = lemma11_lhs_rhs(a_seq, beta11)
        assert lhs <= rhs * (1 + 1e-12)


class TestLedger:
    def run_ledger(self, method="fr", T=300, b=0.5, beta1=0.9, dim=4):
        q = quadratic(dim, 10.0)
        hp = HyperParams(alpha0=1e-2, lr_exponent=b, beta1=beta1,
                         method=method, epsilon=0.0)
        rng = np.random.default_rng(1)
        state = OptimizerState.fresh(rng.standard_normal(dim) + 0.5)
        ledger = BoundLedger()
        first_weighted = None
        for t in range(1, T + 1):
            g = q.grad(state.x)
            out = step(state, g, hp)
            sc = theory_scalars(hp, state, hp.alpha_at(t), out.gamma)
            accumulate_ledger(ledger, sc, out, q.grad(state.x),
                              hp.alpha_at(t))
            if first_weighted is None:
                first_weighted = sc.mu_t / np.sqrt(out.v_hat_max)
            last = (sc.mu_t / np.sqrt(out.v_hat_max), out.v_hat_max.copy())
        return ledger, first_weighted, last, hp

    def test_gamma_zero_keeps_decay_sum_zero(self):
        ledger, _, _, _ = self.run_ledger(method="none")
        assert ledger.sum_gamma_decay == 0.0

    def test_accumulators_monotone(self):
        q = quadratic(3, 5.0)
        hp = HyperParams(alpha0=1e-2, method="fr", epsilon=0.0)
        state = OptimizerState.fresh(np.array([1.0, -2.0, 0.5]))
        ledger = BoundLedger()
        prev = (0.0, 0.0, 0.0, 0.0, math.inf)
        for t in range(1, 200):
            out = step(state, q.grad(state.x), hp)
            sc = theory_scalars(hp, state, hp.alpha_at(t), out.gamma)
            accumulate_ledger(ledger, sc, out, q.grad(state.x),
                              hp.alpha_at(t))
            cur = (ledger.sum_mu_drift, ledger.sum_step_energy,
                   ledger.sum_gamma_decay, ledger.sum_tau,
                   ledger.min_grad_sq_so_far)
            assert cur[0] >= prev[0] and cur[1] >= prev[1]
            assert cur[2] >= prev[2] and cur[3] >= prev[3]
            assert cur[4] <= prev[4]
            prev = cur

    def test_constant_beta1_drift_telescopes(self):
        ledger, first_w, (last_w, _), _ = self.run_ledger(T=1000)
        telescoped = float(np.sum(first_w - last_w))
        assert ledger.sum_mu_drift == pytest.approx(telescoped, abs=1e-8)

    def test_decay_sum_log_bound(self):
        # alpha_t = alpha/sqrt(t), damping exponent > 1/2:
        # sum alpha_t |gamma_t| / t^a <= alpha * max|gamma| * (1 + ln T)
        T = 1000
        ledger, _, _, hp = self.run_ledger(T=T)
        bound = hp.alpha0 * ledger.max_abs_gamma * (1.0 + math.log(T))
        assert ledger.sum_gamma_decay <= bound + 1e-12

    def test_tau_sum_scaling_lower_bound(self):
        # constant alpha: per-coordinate second moment never exceeds the
        # squared direction bound, so each tau >= alpha*sqrt(1-beta2)/Hbar
        q = quadratic(4, 10.0)
        hp = HyperParams(alpha0=1e-2, method="fr", epsilon=0.0)
        rng = np.random.default_rng(2)
        state = OptimizerState.fresh(rng.standard_normal(4))
        ledger = BoundLedger()
        h_bar = 0.0
        T = 500
        for t in range(1, T + 1):
            out = step(state, q.grad(state.x), hp)
            h_bar = max(h_bar, float(np.linalg.norm(out.d)))
            sc = theory_scalars(hp, state, hp.alpha_at(t), out.gamma)
            accumulate_ledger(ledger, sc, out, q.grad(state.x),
                              hp.alpha_at(t))
        lower = T * hp.alpha0 * math.sqrt(1.0 - hp.beta2) / h_bar
        assert ledger.sum_tau >= lower


class TestRateCheck:
    def test_converging_sequence_passes(self):
        Ts = np.unique(np.logspace(1, 5, 30).astype(int))
        samples = [(int(T), 50.0 * math.log(T) / math.sqrt(T)) for T in Ts]
        res = rate_check(samples, b=0.5)
        assert res.ok, res.note

    def test_min_so_far_is_monotone_input(self):
        # helper sanity for the acceptance run: later minima never exceed
        vals = [10.0, 5.0, 5.0, 1.0, 0.5]
        assert all(b <= a for a, b in zip(vals, vals[1:]))

    def test_too_few_samples_inconclusive(self):
        res = rate_check([(10, 1.0), (100, 0.5)], b=0.5)
        assert not res.ok and "inconclusive" in res.note

    def test_flat_sequence_inconclusive(self):
        samples = [(int(T), 2.0) for T in np.logspace(1, 5, 20)]
        res = rate_check(samples, b=0.5)
        assert not res.ok and "inconclusive" in res.note

    def test_diverging_ratio_fails(self):
        Ts = np.unique(np.logspace(1, 5, 30).astype(int))
        samples = [(int(T), 1.0 / math.log(T)) for T in Ts]
        res = rate_check(samples, b=0.5)
        assert not res.ok


class TestReports:
    def test_csv_and_text(self, tmp_path):
        series, hp = scalars_for_schedule(0.9, T=50)
        results = check_lemma_bounds(series, hp)
        path = tmp_path / "report.csv"
        write_report_csv(results, path)
        lines = path.read_text().strip().splitlines()
        assert lines[0] == "name,status,worst_t,margin"
        assert len(lines) == len(results) + 1
        text = format_report(results)
        assert "xi_range" in text

    def test_coupled_iterate(self):
        x = np.array([2.0, 0.0])
        x_prev = np.array([1.0, 1.0])
        np.testing.assert_allclose(coupled_iterate(x, x_prev, 0.5),
                                   [2.5, -0.5])
