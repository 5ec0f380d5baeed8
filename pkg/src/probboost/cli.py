"""Command-line entry point: ``probboost {train,predict,eval,gradfield,generate-synthetic}``.

Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical failure.
Every failure prints a single ``error: ...`` line on stderr.
"""
from __future__ import annotations

import argparse
import io
import json
import sys

import numpy as np

from .boosting import BoostConfig, NumericalError, predict_params, train
from .data import SYNTHETIC_KINDS, DataError, ingest_csv, make_synthetic, read_table
from .distributions import ConfigError, Family, Rule, cdf, point_estimate, quantile
from .evaluation import Variant, gradient_field, run_protocol
from .model_io import ModelFormatError, atomic_write, load_model, save_model
from .natgrad import Direction, check_direction
from .trees import TreeConfig

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _floats(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _range(text: str) -> tuple[float, float]:
    vals = _floats(text)
    if len(vals) != 2:
        raise argparse.ArgumentTypeError(f"expected LO,HI, got {text!r}")
    return vals[0], vals[1]


def _add_model_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--dist", choices=[f.value for f in Family], default="normal")
    p.add_argument("--score", choices=[r.value for r in Rule], default="logscore")
    p.add_argument("--direction", choices=[d.value for d in Direction], default="natural")
    p.add_argument("--stages", type=int, default=500)
    p.add_argument("--lr", type=float, default=0.01)
    p.add_argument("--minibatch-frac", type=float, default=1.0)
    p.add_argument("--max-depth", type=int, default=3)
    p.add_argument("--min-samples-split", type=int, default=2)
    p.add_argument("--line-search", choices=["first", "best"], default="first")
    p.add_argument("--seed", type=int, default=0)


def _add_data_flags(p: argparse.ArgumentParser, target_required: bool = True) -> None:
    p.add_argument("--data", required=True, help="CSV file")
    p.add_argument("--target", required=target_required, help="target column name or 0-based index")
    p.add_argument("--no-header", action="store_true", help="the CSV has no header row")


def _config(args) -> BoostConfig:
    try:
        return BoostConfig(
            n_stages=args.stages,
            learning_rate=args.lr,
            minibatch_frac=args.minibatch_frac,
            direction=Direction(args.direction),
            rule=Rule(args.score),
            family=Family(args.dist),
            tree=TreeConfig(args.max_depth, args.min_samples_split),
            seed=args.seed,
            line_search=args.line_search,
        )
    except ConfigError:
        raise
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _write_csv(path, header: list[str], columns: list[np.ndarray]) -> None:
    buf = io.StringIO()
    buf.write(",".join(header) + "\n")
    for row in zip(*columns):
        buf.write(",".join(repr(float(v)) for v in row) + "\n")
    if path == "-":
        sys.stdout.write(buf.getvalue())
    else:
        atomic_write(path, buf.getvalue())


def cmd_train(args) -> int:
    cfg = _config(args)
    dataset = ingest_csv(args.data, args.target, not args.no_header)

    def report(stage, total):
        print(f"{stage}\t{total!r}")

    model = train(dataset, cfg, on_stage=report if args.verbose else None)
    save_model(model, args.out, record_wall_time=args.record_wall_time)
    return EXIT_OK


def _prediction_features(args, expected: int) -> np.ndarray:
    _, values = read_table(args.data, not args.no_header)
    if args.target is not None:
        ds = ingest_csv(args.data, args.target, not args.no_header)
        values = ds.features
    if values.shape[1] != expected:
        raise DataError(f"model expects {expected} feature columns, data has {values.shape[1]}")
    return values


def cmd_predict(args) -> int:
    model = load_model(args.model)
    fam = model.config.family
    d = model.metadata.get("d")
    X = _prediction_features(args, int(d) if d is not None else len(model.metadata["feature_names"]))
    theta = predict_params(model, X)
    if args.emit == "params":
        _write_csv(args.out, list(fam.param_names), [theta[:, 0], theta[:, 1]])
    elif args.emit == "mean":
        _write_csv(args.out, ["mean"], [point_estimate(fam, theta)])
    elif args.emit == "quantiles":
        if not args.q:
            raise UsageError("--emit quantiles requires --q")
        try:
            cols = [quantile(fam, theta, q) for q in args.q]
        except ValueError as exc:
            raise UsageError(str(exc)) from None
        _write_csv(args.out, [f"q{q!r}" for q in args.q], cols)
    else:
        if args.lo is None or args.hi is None:
            raise UsageError("--emit interval-prob requires --lo and --hi")
        if args.lo > args.hi:
            raise UsageError("--lo must not exceed --hi")
        prob = cdf(fam, theta, args.hi) - cdf(fam, theta, args.lo)
        _write_csv(args.out, ["prob"], [prob])
    return EXIT_OK


def cmd_eval(args) -> int:
    cfg = _config(args)
    if args.repetitions < 1:
        raise UsageError("--repetitions must be at least 1")
    dataset = ingest_csv(args.data, args.target, not args.no_header)
    variants = list(Variant) if args.variant == "all" else [Variant(args.variant)]
    doc = {"dataset": args.data, "protocol": bool(args.protocol), "repetitions": args.repetitions, "results": {}}
    for v in variants:
        try:
            res = run_protocol(dataset, cfg, args.repetitions, args.seed, variant=v, select_M=args.protocol)
        except ConfigError:
            raise
        except ValueError as exc:
            raise UsageError(str(exc)) from None
        agg = {"mean_nll": res.mean_nll, "mean_rmse": res.mean_rmse}
        if res.se_nll is not None:
            agg["se_nll"] = res.se_nll
            agg["se_rmse"] = res.se_rmse
        doc["results"][v.value] = {
            "repetitions": [r.__dict__ for r in res.records],
            "aggregate": agg,
        }
        se = "" if res.se_nll is None else f" +- {res.se_nll:.4f}"
        se_r = "" if res.se_rmse is None else f" +- {res.se_rmse:.4f}"
        print(f"{v.value}\tnll {res.mean_nll:.4f}{se}\trmse {res.mean_rmse:.4f}{se_r}")
    atomic_write(args.out, json.dumps(doc, indent=1, sort_keys=True) + "\n")
    return EXIT_OK


def cmd_gradfield(args) -> int:
    family, rule, kind = Family(args.dist), Rule(args.score), Direction(args.direction)
    check_direction(kind, rule, family)
    if args.grid_n < 1:
        raise UsageError("--grid-n must be at least 1")
    for name, (lo, hi) in (("--mu-range", args.mu_range), ("--logsigma-range", args.logsigma_range)):
        if not lo < hi and not (lo == hi and args.grid_n == 1):
            raise UsageError(f"{name} is empty: {lo},{hi}")
    if args.y_values:
        ys = np.array(args.y_values)
    else:
        if args.y_samples < 1:
            raise UsageError("--y-samples must be at least 1")
        ys = np.random.default_rng(args.seed).standard_normal(args.y_samples)
    mus = np.linspace(*args.mu_range, args.grid_n)
    lss = np.linspace(*args.logsigma_range, args.grid_n)
    table = gradient_field(rule, family, mus, lss, ys, kind)
    _write_csv(args.out, ["mu", "logsigma", "dmu", "dlogsigma", "score"], list(table.T))
    return EXIT_OK


def cmd_generate(args) -> int:
    if args.n < 1:
        raise UsageError("--n must be at least 1")
    ds = make_synthetic(args.kind, args.n, args.seed)
    cols = [ds.features[:, j] for j in range(ds.n_features)] + [ds.targets]
    _write_csv(args.out, list(ds.feature_names) + [ds.target_name], cols)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="probboost", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("train", help="fit a model and write it as JSON")
    _add_data_flags(p)
    _add_model_flags(p)
    p.add_argument("--out", required=True)
    p.add_argument("--verbose", action="store_true", help="print stage<TAB>training score lines")
    p.add_argument("--record-wall-time", action="store_true", help="store training time in the model file")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("predict", help="emit predictions from a saved model")
    p.add_argument("--model", required=True)
    _add_data_flags(p, target_required=False)
    p.add_argument("--out", default="-")
    p.add_argument("--emit", choices=["params", "mean", "quantiles", "interval-prob"], default="params")
    p.add_argument("--q", type=_floats, help="comma-separated quantile levels")
    p.add_argument("--lo", type=float, help="interval lower bound ('-inf' allowed)")
    p.add_argument("--hi", type=float, help="interval upper bound ('inf' allowed)")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("eval", help="repeated hold-out evaluation")
    _add_data_flags(p)
    _add_model_flags(p)
    p.add_argument("--repetitions", type=int, default=20)
    p.add_argument("--protocol", action="store_true", help="select the stage count on a validation split")
    p.add_argument("--variant", choices=[v.value for v in Variant] + ["all"], default="ngboost")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("gradfield", help="tabulate mean descent directions over a parameter grid")
    p.add_argument("--dist", choices=[f.value for f in Family], default="normal")
    p.add_argument("--score", choices=[r.value for r in Rule], default="logscore")
    p.add_argument("--direction", choices=[d.value for d in Direction], default="natural")
    p.add_argument("--mu-range", type=_range, default=(-2.0, 2.0))
    p.add_argument("--logsigma-range", type=_range, default=(-1.0, 1.0))
    p.add_argument("--grid-n", type=int, default=11)
    p.add_argument("--y-samples", type=int, default=1000, help="number of N(0, 1) draws")
    p.add_argument("--y-values", type=_floats, help="explicit outcomes instead of random draws")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="-")
    p.set_defaults(func=cmd_gradfield)

    p = sub.add_parser("generate-synthetic", help="write a seeded fixture dataset as CSV")
    p.add_argument("--kind", choices=SYNTHETIC_KINDS, default="heteroscedastic")
    p.add_argument("--n", type=int, default=2000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_generate)
    return parser


def _glue_signed_values(argv: list[str]) -> list[str]:
    # argparse would read "--lo -inf" as two flags
    out, i = [], 0
    while i < len(argv):
        tok = argv[i]
        if tok in ("--lo", "--hi") and i + 1 < len(argv) and argv[i + 1].startswith("-"):
            out.append(f"{tok}={argv[i + 1]}")
            i += 2
        else:
            out.append(tok)
            i += 1
    return out


def main(argv=None) -> int:
    parser = build_parser()
    argv = _glue_signed_values(list(sys.argv[1:] if argv is None else argv))

    def fail(code: int, msg: str) -> int:
        print(f"error: {' '.join(str(msg).split())}", file=sys.stderr)
        return code

    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except (UsageError, ConfigError) as exc:
        return fail(EXIT_USAGE, exc)
    except (DataError, ModelFormatError) as exc:
        return fail(EXIT_DATA, exc)
    except NumericalError as exc:
        return fail(EXIT_NUMERIC, exc)
    except OSError as exc:
        return fail(EXIT_DATA, f"{exc.strerror or exc}: {exc.filename or ''}".strip())


if __name__ == "__main__":
    sys.exit(main())
