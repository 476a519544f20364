"""Command-line entry point: run / compare / plotdata subcommands."""

import argparse
import json
import sys

from .errors import ConfigurationError
from .harness import RunConfig, compare, emit_plot_data, run

EXIT_CONFIG = 2
EXIT_IO = 3

_OVERRIDES = [
    ("--optimizer", str, "optimizer"),
    ("--method", str, "method"),
    ("--alpha", float, "alpha"),
    ("--lr-exponent", float, "lr_exponent"),
    ("--beta1", float, "beta1"),
    ("--beta2", float, "beta2"),
    ("--a", float, "a"),
    ("--lambda", float, "lam"),
    ("--epsilon", float, "epsilon"),
    ("--iters", int, "iters"),
    ("--seed", int, "seeds"),
    ("--noise-scale", float, "noise_scale"),
    ("--clip-H", float, "clip_H"),
    ("--out", str, "out_dir"),
]


def _add_override_flags(parser):
    for flag, typ, _field in _OVERRIDES:
        parser.add_argument(flag, type=typ, default=None)
    parser.add_argument("--ledger", action="store_true", default=None)
    parser.add_argument("--vanilla-cg", action="store_true", default=None)


def _apply_overrides(config_dict, args):
    for flag, _typ, name in _OVERRIDES:
        value = getattr(args, flag.lstrip("-").replace("-", "_"))
        if value is None:
            continue
        if name == "seeds":
            config_dict["seeds"] = [value]
        else:
            json_key = "lambda" if name == "lam" else name
            config_dict[json_key] = value
    if args.ledger:
        config_dict["ledger"] = True
    if args.vanilla_cg:
        config_dict["vanilla_cg"] = True
    return config_dict


def _load_config(path, args) -> RunConfig:
    try:
        with open(path) as fh:
            data = json.load(fh)
    except OSError as exc:
        print(f"error: cannot read {path}: {exc}", file=sys.stderr)
        raise SystemExit(EXIT_IO)
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"{path}: invalid JSON: {exc}")
    if not isinstance(data, dict):
        raise ConfigurationError(f"{path}: config must be a JSON object")
    return RunConfig.from_dict(_apply_overrides(data, args))


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="cgadam",
        description="CG-like adaptive-moment optimizer experiment runner")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="execute one config")
    p_run.add_argument("--config", required=True)
    _add_override_flags(p_run)

    p_cmp = sub.add_parser("compare", help="run several configs and rank")
    p_cmp.add_argument("--configs", nargs="+", required=True)
    _add_override_flags(p_cmp)

    p_plot = sub.add_parser("plotdata", help="tidy CSV from a trace dir")
    p_plot.add_argument("--dir", required=True)
    p_plot.add_argument("--out", default=None)

    args = parser.parse_args(argv)
    try:
        if args.command == "run":
            result = run(_load_config(args.config, args))
            row = result.summary_row
            print(f"{row['variant']}: final_loss={row['final_loss_mean']:.6g}"
                  f" min_grad_norm={row['min_grad_norm_mean']:.6g}"
                  f" diverged={row['diverged']}/{row['seeds']}")
            print(f"summary: {result.summary_path}")
            return 0
        if args.command == "compare":
            configs = [_load_config(p, args) for p in args.configs]
            rows = compare(configs)
            for row in rows:
                print(f"#{row['rank']} {row['variant']}"
                      f" final_loss={row['final_loss_mean']:.6g}"
                      f" steps_to_full_acc={row['steps_to_full_acc_mean']}")
            return 0
        path = emit_plot_data(args.dir, args.out)
        print(path)
        return 0
    except ConfigurationError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    raise SystemExit(main())
