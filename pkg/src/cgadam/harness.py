"""Experiment runner: seeded runs, per-step trace CSVs, summaries.

Trace rows are written at t=1 (the initial point, before any step) and
then after every record_every-th step; the row labelled t shows the
iterate x_t together with the step quantities that produced it. All float
formatting uses repr-faithful "%.17g" so identical configs give
byte-identical files; wall-clock times are only recorded when timing=True
(they are the one nondeterministic column).
"""

import csv
import json
import math
import os
import statistics
import time
from dataclasses import dataclass, field, fields
from typing import Dict, List, Optional, Sequence

import numpy as np

from . import diagnostics
from .baselines import KINDS, BaselineKind, baseline_step
from .errors import (ConfigurationError, ContractViolationError,
                     NonFiniteError)
from .optimizer import METHODS, HyperParams, OptimizerState, step
from .problems import (GradientOracle, NoisyOracle, logistic_regression,
                       noisy_gradient, quadratic, rosenbrock, tiny_mlp)

TRACE_HEADER = ("t,loss,grad_norm,gamma,d_norm,tau,"
                "sum_gamma_decay,sum_step_energy,sum_mu_drift,wall_ms")

OPTIMIZERS = ("cg_like_adam",) + KINDS

DIVERGENCE_LOSS = 1e12

# JSON key -> dataclass field (lambda is a Python keyword)
_KEY_ALIASES = {"lambda": "lam"}


@dataclass
class RunConfig:
    problem: str = "quadratic"
    optimizer: str = "cg_like_adam"
    method: str = "fr"
    alpha: float = 1e-3
    lr_exponent: float = 0.0
    beta1: float = 0.9
    beta2: float = 0.999
    a: float = 1.0 + 1e-5
    lam: float = 2.0
    epsilon: float = 1e-8
    iters: int = 1000
    seeds: List[int] = field(default_factory=lambda: [0])
    noise_scale: float = 0.0
    clip_H: float = 0.0
    record_every: int = 1
    out_dir: str = "runs"
    ledger: bool = False
    vanilla_cg: bool = False
    coba_M: float = 1e-4
    timing: bool = False
    # problem parameters
    dim: int = 10
    condition: float = 1.0
    n_samples: int = 200
    hidden: int = 16
    data_seed: int = 7
    batch_size: int = 0          # 0 = full batch
    init_scale: float = 0.5

    def __post_init__(self):
        if self.problem not in ("quadratic", "rosenbrock", "logreg",
                                "tiny_mlp"):
            raise ConfigurationError(f"unknown problem {self.problem!r}")
        if self.optimizer not in OPTIMIZERS:
            raise ConfigurationError(f"unknown optimizer {self.optimizer!r}")
        if self.method not in METHODS:
            raise ConfigurationError(f"unknown method {self.method!r}")
        if self.iters < 1:
            raise ConfigurationError("iters must be >= 1")
        if not self.seeds:
            raise ConfigurationError("seeds must be nonempty")
        if self.record_every < 1:
            raise ConfigurationError("record_every must be >= 1")
        if self.noise_scale > 0.0 and self.clip_H <= 0.0:
            raise ConfigurationError("noise_scale > 0 requires clip_H > 0")

    @classmethod
    def from_dict(cls, data: Dict) -> "RunConfig":
        known = {f.name for f in fields(cls)}
        kwargs = {}
        for key, value in data.items():
            name = _KEY_ALIASES.get(key, key)
            if name not in known:
                raise ConfigurationError(f"unknown config key {key!r}")
            kwargs[name] = value
        return cls(**kwargs)

    @classmethod
    def from_file(cls, path) -> "RunConfig":
        with open(path) as fh:
            data = json.load(fh)
        if not isinstance(data, dict):
            raise ConfigurationError("config file must hold a JSON object")
        return cls.from_dict(data)

    def variant(self) -> str:
        if self.optimizer == "cg_like_adam":
            tag = f"cg_like_adam-{self.method}"
            if self.vanilla_cg:
                tag += "-vanilla"
            return tag
        if self.optimizer == "coba":
            return f"coba-{self.method}"
        return self.optimizer

    def hyperparams(self) -> HyperParams:
        return HyperParams(alpha0=self.alpha, lr_exponent=self.lr_exponent,
                           beta1=self.beta1, beta2=self.beta2, a=self.a,
                           epsilon=self.epsilon, method=self.method,
                           lam=self.lam)

    def make_oracle(self) -> GradientOracle:
        if self.problem == "quadratic":
            return quadratic(self.dim, self.condition)
        if self.problem == "rosenbrock":
            return rosenbrock(self.dim)
        if self.problem == "logreg":
            return logistic_regression(self.n_samples, self.dim,
                                       self.data_seed)
        return tiny_mlp(self.hidden, self.data_seed)


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


@dataclass
class SeedResult:
    seed: int
    trace_path: str
    final_loss: float
    best_loss: float
    min_grad_norm: float
    steps_to_full_acc: Optional[int]
    diverged: bool
    ledger: diagnostics.BoundLedger
    wall_ms: float


def _initial_point(config: RunConfig, oracle: GradientOracle,
                   seed: int) -> np.ndarray:
    if config.problem == "rosenbrock":
        # classic start plus a seeded jitter so seeds differ
        rng = np.random.default_rng((seed, 1))
        x0 = np.tile([-1.2, 1.0], config.dim // 2)
        return x0 + 0.05 * rng.standard_normal(config.dim)
    rng = np.random.default_rng((seed, 1))
    return config.init_scale * rng.standard_normal(oracle.dim)


def run_single_seed(config: RunConfig, oracle: GradientOracle,
                    seed: int, out_dir) -> SeedResult:
    hp = config.hyperparams()
    noisy = None
    if config.noise_scale > 0.0 or config.clip_H > 0.0:
        noisy = NoisyOracle(base=oracle, noise_scale=config.noise_scale,
                            clip_H=config.clip_H, seed=seed)
    state = OptimizerState.fresh(_initial_point(config, oracle, seed))
    kind = None
    if config.optimizer != "cg_like_adam":
        kind = BaselineKind(config.optimizer, coba_M=config.coba_M)
    batch_rng = np.random.default_rng((seed, 2))
    use_batches = (config.batch_size > 0 and oracle.grad_batch is not None
                   and config.batch_size < oracle.n_samples)

    ledger = diagnostics.BoundLedger()
    rows = []
    loss0 = oracle.eval(state.x)
    gnorm0 = float(np.linalg.norm(oracle.grad(state.x)))
    rows.append((1, loss0, gnorm0, 0.0, 0.0, 0.0, ledger, 0.0))
    best_loss = loss0
    min_gn = gnorm0
    steps_to_acc = None
    diverged = False
    want_eta = hp.beta11 != 0.5
    start = time.perf_counter()

    for t in range(1, config.iters + 1):
        try:
            if use_batches:
                idx = batch_rng.choice(oracle.n_samples, config.batch_size,
                                       replace=False)
                g = oracle.grad_batch(state.x, idx)
            elif noisy is not None:
                g = noisy_gradient(noisy, state.x, t)
            else:
                g = oracle.grad(state.x)
            if kind is None:
                out = step(state, g, hp, rectify=not config.vanilla_cg)
            else:
                out = baseline_step(kind, state, g, hp)
        except (NonFiniteError, ContractViolationError):
            diverged = True
            break

        alpha_t = hp.alpha_at(t)
        record_now = t % config.record_every == 0
        scalars = None
        if config.ledger or record_now:
            scalars = diagnostics.theory_scalars(
                hp, state, alpha_t, out.gamma, want_eta=want_eta)
            if kind is not None and not kind.conventions()[2]:
                # no running max: the effective-stepsize ledger falls back
                # to the current bias-convention second moment
                out.v_hat_max = out.v_hat.copy()
                with np.errstate(divide="ignore"):
                    scalars.tau_t = float(np.min(
                        alpha_t / np.sqrt(out.v_hat_max)))
        if config.ledger:
            exact_g = oracle.grad(state.x)
            with np.errstate(divide="ignore"):
                diagnostics.accumulate_ledger(ledger, scalars, out,
                                              exact_g, alpha_t)
        if record_now:
            loss = oracle.eval(state.x)
            gnorm = float(np.linalg.norm(oracle.grad(state.x)))
            if not math.isfinite(loss) or loss > DIVERGENCE_LOSS:
                diverged = True
                break
            best_loss = min(best_loss, loss)
            min_gn = min(min_gn, gnorm)
            if (steps_to_acc is None and oracle.accuracy is not None
                    and oracle.accuracy(state.x) == 1.0):
                steps_to_acc = t
            wall = ((time.perf_counter() - start) * 1e3
                    if config.timing else 0.0)
            rows.append((t + 1, loss, gnorm, out.gamma,
                         float(np.linalg.norm(out.d)), scalars.tau_t,
                         diagnostics.BoundLedger(
                             sum_mu_drift=ledger.sum_mu_drift,
                             sum_step_energy=ledger.sum_step_energy,
                             sum_gamma_decay=ledger.sum_gamma_decay),
                         wall))

    final_loss = rows[-1][1] if not diverged else math.inf
    wall_total = (time.perf_counter() - start) * 1e3

    trace_path = os.path.join(out_dir,
                              f"{config.variant()}__seed{seed}.csv")
    tmp = trace_path + ".tmp"
    with open(tmp, "w", newline="") as fh:
        fh.write(TRACE_HEADER + "\n")
        for (t, loss, gnorm, gamma, dnorm, tau, led, wall) in rows:
            fh.write(",".join([
                str(t), _fmt(loss), _fmt(gnorm), _fmt(gamma), _fmt(dnorm),
                _fmt(tau), _fmt(led.sum_gamma_decay),
                _fmt(led.sum_step_energy), _fmt(led.sum_mu_drift),
                _fmt(wall)]) + "\n")
    os.replace(tmp, trace_path)

    return SeedResult(seed=seed, trace_path=trace_path,
                      final_loss=final_loss, best_loss=best_loss,
                      min_grad_norm=min_gn, steps_to_full_acc=steps_to_acc,
                      diverged=diverged, ledger=ledger, wall_ms=wall_total)


SUMMARY_HEADER = ("variant,seeds,diverged,final_loss_mean,final_loss_std,"
                  "best_loss_mean,best_loss_std,min_grad_norm_mean,"
                  "min_grad_norm_std,steps_to_full_acc_mean")


def _mean_std(values):
    finite = [v for v in values if math.isfinite(v)]
    if not finite:
        return math.inf, 0.0
    mean = statistics.fmean(finite)
    std = statistics.pstdev(finite) if len(finite) > 1 else 0.0
    return mean, std


@dataclass
class RunResult:
    config: RunConfig
    seed_results: List[SeedResult]
    summary_path: str
    summary_row: Dict[str, object]


def summarize(config: RunConfig,
              seed_results: Sequence[SeedResult]) -> Dict[str, object]:
    fl_mean, fl_std = _mean_std([r.final_loss for r in seed_results])
    bl_mean, bl_std = _mean_std([r.best_loss for r in seed_results])
    gn_mean, gn_std = _mean_std([r.min_grad_norm for r in seed_results])
    accs = [r.steps_to_full_acc for r in seed_results
            if r.steps_to_full_acc is not None]
    acc_mean = statistics.fmean(accs) if accs else math.nan
    return {
        "variant": config.variant(),
        "seeds": len(seed_results),
        "diverged": sum(r.diverged for r in seed_results),
        "final_loss_mean": fl_mean, "final_loss_std": fl_std,
        "best_loss_mean": bl_mean, "best_loss_std": bl_std,
        "min_grad_norm_mean": gn_mean, "min_grad_norm_std": gn_std,
        "steps_to_full_acc_mean": acc_mean,
    }


def _write_summary(path, rows: Sequence[Dict[str, object]]) -> None:
    tmp = str(path) + ".tmp"
    with open(tmp, "w", newline="") as fh:
        fh.write(SUMMARY_HEADER + "\n")
        for row in rows:
            fh.write(",".join([
                str(row["variant"]), str(row["seeds"]),
                str(row["diverged"]),
                _fmt(row["final_loss_mean"]), _fmt(row["final_loss_std"]),
                _fmt(row["best_loss_mean"]), _fmt(row["best_loss_std"]),
                _fmt(row["min_grad_norm_mean"]),
                _fmt(row["min_grad_norm_std"]),
                _fmt(row["steps_to_full_acc_mean"])]) + "\n")
    os.replace(tmp, path)


def run(config: RunConfig) -> RunResult:
    """Execute all seeds of one config; writes traces plus summary.csv."""
    os.makedirs(config.out_dir, exist_ok=True)
    oracle = config.make_oracle()
    seed_results = [run_single_seed(config, oracle, seed, config.out_dir)
                    for seed in config.seeds]
    row = summarize(config, seed_results)
    summary_path = os.path.join(config.out_dir, "summary.csv")
    _write_summary(summary_path, [row])
    if config.ledger:
        _write_ledger_report(config, seed_results)
    return RunResult(config=config, seed_results=seed_results,
                     summary_path=summary_path, summary_row=row)


def _write_ledger_report(config: RunConfig,
                         seed_results: Sequence[SeedResult]) -> None:
    path = os.path.join(config.out_dir, f"{config.variant()}__ledger.csv")
    tmp = path + ".tmp"
    with open(tmp, "w", newline="") as fh:
        writer = csv.writer(fh)
        keys = ["sum_mu_drift", "sum_step_energy", "sum_gamma_decay",
                "sum_tau", "lhs_sum", "min_grad_sq_so_far"]
        writer.writerow(["seed"] + keys)
        for r in seed_results:
            d = r.ledger.as_dict()
            writer.writerow([r.seed] + [_fmt(d[k]) for k in keys])
    os.replace(tmp, path)


def compare(configs: Sequence[RunConfig]) -> List[Dict[str, object]]:
    """Run several configs on their common seeds and rank the variants."""
    if not configs:
        raise ConfigurationError("compare needs at least one config")
    first = configs[0]
    for c in configs[1:]:
        same_problem = (c.problem == first.problem and c.dim == first.dim
                        and c.condition == first.condition
                        and c.hidden == first.hidden
                        and c.n_samples == first.n_samples
                        and c.data_seed == first.data_seed)
        if not same_problem:
            raise ConfigurationError("compare configs must share the problem")
        if c.iters != first.iters:
            raise ConfigurationError("compare configs must share iters")
    common = set(configs[0].seeds)
    for c in configs[1:]:
        common &= set(c.seeds)
    if not common:
        raise ConfigurationError("compare configs share no seeds")
    seeds = sorted(common)

    rows = []
    for c in configs:
        oracle = c.make_oracle()
        os.makedirs(c.out_dir, exist_ok=True)
        results = [run_single_seed(c, oracle, s, c.out_dir) for s in seeds]
        rows.append(summarize(c, results))
    rows.sort(key=lambda r: (r["final_loss_mean"], r["variant"]))
    for rank, row in enumerate(rows, start=1):
        row["rank"] = rank
    return rows


PLOT_METRICS = ("loss", "grad_norm", "gamma")


def emit_plot_data(trace_dir, out_path=None) -> str:
    """Tidy long-format CSV (variant, seed, t, metric, value) from traces.

    Corrupt or unreadable traces are reported on stderr and skipped.
    """
    import sys

    if out_path is None:
        out_path = os.path.join(trace_dir, "plotdata.csv")
    names = sorted(n for n in os.listdir(trace_dir)
                   if n.endswith(".csv") and "__seed" in n)
    lines = ["variant,seed,t,metric,value"]
    for name in names:
        path = os.path.join(trace_dir, name)
        try:
            variant, seed_part = name[:-4].rsplit("__seed", 1)
            seed = int(seed_part)
            with open(path, newline="") as fh:
                reader = csv.DictReader(fh)
                if reader.fieldnames != TRACE_HEADER.split(","):
                    raise ValueError("unexpected header")
                for row in reader:
                    for metric in PLOT_METRICS:
                        lines.append(f"{variant},{seed},{row['t']},"
                                     f"{metric},{row[metric]}")
        except (ValueError, OSError) as exc:
            print(f"plotdata: skipping {name}: {exc}", file=sys.stderr)
    tmp = str(out_path) + ".tmp"
    with open(tmp, "w", newline="") as fh:
        fh.write("\n".join(lines) + "\n")
    os.replace(tmp, out_path)
    return out_path
