"""Command-line driver: ``sigpayoff {expected-sig,fit,eval,price,simulate}``.

Configuration comes from one JSON file; ``--seed``, ``--order``, ``--mode``,
``--payoff`` and ``--out`` override it.  The output directory may also be set
with ``SIGPAYOFF_OUTPUT_DIR`` (flag > environment > file).

Exit codes: 0 success, 1 usage or configuration error, 2 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import os
import sys
import tempfile
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .calibration import (
    ConditionRanges,
    DatasetMode,
    FitResult,
    build_dataset,
    evaluate,
    fit,
    sample_conditions,
    signature_price,
)
from .expected_signature import phi_csv_rows
from .market import MarketCondition, SimConfig, path_stream, simulate_gbm_path, stream_key
from .payoffs import GroundTruthConfig, PayoffSpec
from .tensor_algebra import check_order, n_words

log = logging.getLogger("sigpayoff")

OUTPUT_ENV = "SIGPAYOFF_OUTPUT_DIR"
FALLBACK_RIDGE = 1e-10


class ConfigError(ValueError):
    pass


class NumericalError(RuntimeError):
    pass


@dataclass
class RunConfig:
    order: int = 4
    seed: int = 0
    test_seed: int | None = None
    payoff: PayoffSpec = field(default_factory=lambda: PayoffSpec("EuropeanCall", 0.99))
    mode: DatasetMode = DatasetMode.PRICEWISE
    n_train: int = 100
    n_test: int = 100
    ranges: ConditionRanges = field(default_factory=ConditionRanges)
    sim: SimConfig = field(default_factory=SimConfig)
    ground_truth: GroundTruthConfig = field(default_factory=GroundTruthConfig)
    ridge: float = 1e-10
    market: MarketCondition = field(default_factory=lambda: MarketCondition(100.0, 0.05, 0.2, 1.0))
    paths_per_condition: int = 1
    output_dir: Path = Path("out")

    def __post_init__(self):
        if check_order(self.order) < 1:
            raise ConfigError("order must be >= 1")
        if self.n_train < 1 or self.n_test < 1:
            raise ConfigError("n_train and n_test must be >= 1")
        if self.ridge < 0:
            raise ConfigError("ridge must be non-negative")
        if self.paths_per_condition < 1:
            raise ConfigError("paths_per_condition must be >= 1")

    @property
    def train_split_seed(self) -> int:
        return self.seed

    @property
    def test_split_seed(self) -> int:
        if self.test_seed is not None:
            return self.test_seed
        return stream_key(self.seed, "test-split") & (2**64 - 1)

    @classmethod
    def from_dict(cls, doc: dict, overrides: dict | None = None) -> "RunConfig":
        doc = {**doc, **{k: v for k, v in (overrides or {}).items() if v is not None}}
        unknown = set(doc) - set(cls.__dataclass_fields__)
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        seed = int(doc.get("seed", 0))
        payoff = doc.get("payoff", {"kind": "EuropeanCall", "moneyness": 0.99})
        if isinstance(payoff, str):
            payoff = {"kind": payoff, "moneyness": 0.99}
        sim = {"seed": seed, **doc.get("sim", {})}
        gt = {"seed": seed, **doc.get("ground_truth", {})}
        try:
            return cls(
                order=int(doc.get("order", 4)),
                seed=seed,
                test_seed=None if doc.get("test_seed") is None else int(doc["test_seed"]),
                payoff=PayoffSpec.from_dict(payoff),
                mode=DatasetMode(doc.get("mode", "pricewise")),
                n_train=int(doc.get("n_train", 100)),
                n_test=int(doc.get("n_test", 100)),
                ranges=ConditionRanges.from_dict(doc.get("ranges", {})),
                sim=SimConfig(**sim),
                ground_truth=GroundTruthConfig(**gt),
                ridge=float(doc.get("ridge", 1e-10)),
                market=MarketCondition(**doc.get("market", {"spot": 100.0, "rate": 0.05, "vol": 0.2, "maturity": 1.0})),
                paths_per_condition=int(doc.get("paths_per_condition", 1)),
                output_dir=Path(doc.get("output_dir", "out")),
            )
        except (TypeError, KeyError) as exc:
            raise ConfigError(f"invalid config: {exc}") from exc


def write_atomic(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        os.unlink(tmp)
        raise


def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buf.getvalue()


def _fmt(x: float) -> str:
    return repr(float(x))


def _check_finite(*values):
    arr = np.asarray(values, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise NumericalError("non-finite value in result")


def load_functional(path: Path, cfg: RunConfig) -> FitResult:
    try:
        result = FitResult.from_json(Path(path).read_text())
    except FileNotFoundError as exc:
        raise ConfigError(f"functional file not found: {path}") from exc
    if result.order != cfg.order:
        raise ConfigError(f"functional has order {result.order} but config order is {cfg.order}")
    return result


def cmd_expected_sig(cfg: RunConfig, args) -> int:
    rows = phi_csv_rows(cfg.market, cfg.order)
    _check_finite(*(c for _, _, c in rows))
    out = Path(args.output) if args.output else cfg.output_dir / "expected_signature.csv"
    write_atomic(out, _csv_text(["word", "alpha", "coefficient"], ((w, a, _fmt(c)) for w, a, c in rows)))
    print(out)
    return 0


def cmd_fit(cfg: RunConfig, args) -> int:
    ridge = cfg.ridge
    if cfg.n_train < n_words(cfg.order) and ridge == 0:
        log.warning("underdetermined design (%d rows, %d features); using ridge=%g", cfg.n_train, n_words(cfg.order), FALLBACK_RIDGE)
        ridge = FALLBACK_RIDGE
    if cfg.n_train == 1:
        log.warning("n_train=1: the fitted functional is a ridge-regularised interpolant of one sample")
    conditions = sample_conditions(cfg.n_train, cfg.train_split_seed, cfg.ranges)
    try:
        ds = build_dataset(
            cfg.payoff, conditions, cfg.mode, cfg.order, cfg.sim, cfg.ground_truth,
            split="train", paths_per_condition=cfg.paths_per_condition,
        )
    except ValueError as exc:
        raise ConfigError(f"dataset build failed: {exc}") from exc
    result = fit(ds, ridge)
    _check_finite(result.functional.weights)
    result.meta.update(
        {
            "payoff": cfg.payoff.to_dict(),
            "train_seed": cfg.train_split_seed,
            "n_train": cfg.n_train,
            "ranges": cfg.ranges.to_dict(),
        }
    )
    out = cfg.output_dir / "functional.json"
    write_atomic(out, result.to_json() + "\n")
    diag = {
        "train_r2": None if np.isnan(result.train_r2) else result.train_r2,
        "residual_norm": result.residual_norm,
        "n_rows": int(ds.features.shape[0]),
        "n_features": int(ds.features.shape[1]),
        "ridge": ridge,
        "mode": cfg.mode.value,
        "payoff": cfg.payoff.kind.value,
    }
    write_atomic(cfg.output_dir / "train_diagnostics.json", json.dumps(diag, indent=2) + "\n")
    print(f"train_r2={diag['train_r2']} weights={result.functional.weights.size} -> {out}")
    return 0


def cmd_eval(cfg: RunConfig, args) -> int:
    result = load_functional(args.functional, cfg)
    train_seed = int(result.meta.get("train_seed", cfg.train_split_seed))
    if cfg.test_split_seed == train_seed:
        raise ConfigError("test seed equals the training seed; refusing to evaluate on training conditions")
    if cfg.n_test < 1:
        raise ConfigError("test set is empty")
    spec = PayoffSpec.from_dict(result.meta["payoff"]) if "payoff" in result.meta else cfg.payoff
    conditions = sample_conditions(cfg.n_test, cfg.test_split_seed, cfg.ranges)
    r2, rows = evaluate(result, conditions, spec, cfg.ground_truth, split="test")
    _check_finite(*(r.sig_price for r in rows))
    table = [
        (r.condition_id, _fmt(r.condition.spot), _fmt(r.condition.rate), _fmt(r.condition.vol), _fmt(r.true_price), _fmt(r.sig_price))
        for r in rows
    ]
    write_atomic(
        cfg.output_dir / "eval.csv",
        _csv_text(["condition_id", "x0", "r", "sigma", "true_price", "sig_price"], table),
    )
    summary = {
        "r2": None if np.isnan(r2) else r2,
        "n_train": result.meta.get("n_train"),
        "n_test": cfg.n_test,
        "payoff": spec.kind.value,
        "mode": DatasetMode(result.mode).value,
    }
    write_atomic(cfg.output_dir / "eval_summary.json", json.dumps(summary, indent=2) + "\n")
    print(f"r2={summary['r2']}")
    return 0


def cmd_price(cfg: RunConfig, args) -> int:
    result = load_functional(args.functional, cfg)
    m = cfg.market
    mc = MarketCondition(
        args.spot if args.spot is not None else m.spot,
        args.rate if args.rate is not None else m.rate,
        args.vol if args.vol is not None else m.vol,
        args.maturity if args.maturity is not None else m.maturity,
    )
    price = signature_price(result, mc)
    _check_finite(price)
    print(f"mode={DatasetMode(result.mode).value} price={_fmt(price)}")
    return 0


def cmd_simulate(cfg: RunConfig, args) -> int:
    n = args.paths if args.paths is not None else cfg.sim.paths
    out = cfg.output_dir / "paths"
    for k in range(n):
        path = simulate_gbm_path(cfg.market, cfg.sim.steps, path_stream(cfg.sim.seed, k, "simulate"))
        rows = ((_fmt(t), _fmt(x)) for t, x in zip(path.times, path.values))
        write_atomic(out / f"path_{k:06d}.csv", _csv_text(["time", "value"], rows))
    print(f"{n} paths -> {out}")
    return 0


COMMANDS = {
    "expected-sig": cmd_expected_sig,
    "fit": cmd_fit,
    "eval": cmd_eval,
    "price": cmd_price,
    "simulate": cmd_simulate,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="JSON run configuration")
    common.add_argument("--seed", type=int)
    common.add_argument("--order", type=int)
    common.add_argument("--mode", choices=[m.value for m in DatasetMode])
    common.add_argument("--payoff", help="payoff kind, e.g. EuropeanCall")
    common.add_argument("--out", type=Path, help="output directory")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="sigpayoff", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("expected-sig", parents=[common], help="write the closed-form expected signature")
    p.add_argument("--output", type=Path, help="CSV path (default: <out>/expected_signature.csv)")
    sub.add_parser("fit", parents=[common], help="fit a signature functional on training conditions")
    p = sub.add_parser("eval", parents=[common], help="out-of-sample evaluation of a fitted functional")
    p.add_argument("--functional", type=Path, required=True)
    p.add_argument("--test-seed", type=int, dest="test_seed")
    p = sub.add_parser("price", parents=[common], help="price a fitted functional")
    p.add_argument("--functional", type=Path, required=True)
    p.add_argument("--spot", type=float)
    p.add_argument("--rate", type=float)
    p.add_argument("--vol", type=float)
    p.add_argument("--maturity", type=float)
    p = sub.add_parser("simulate", parents=[common], help="write simulated GBM paths as CSV")
    p.add_argument("--paths", type=int)
    return parser


def load_config(args) -> RunConfig:
    doc = {}
    if args.config is not None:
        try:
            doc = json.loads(Path(args.config).read_text())
        except FileNotFoundError as exc:
            raise ConfigError(f"config file not found: {args.config}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}") from exc
    if os.environ.get(OUTPUT_ENV):
        doc["output_dir"] = os.environ[OUTPUT_ENV]
    overrides = {
        "seed": args.seed,
        "order": args.order,
        "mode": args.mode,
        "output_dir": str(args.out) if args.out is not None else None,
        "test_seed": getattr(args, "test_seed", None),
    }
    if args.payoff is not None:
        payoff = dict(doc.get("payoff", {"moneyness": 0.99}))
        payoff["kind"] = args.payoff
        overrides["payoff"] = payoff
    return RunConfig.from_dict(doc, overrides)


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code == 0 else 1
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s: %(message)s")
    try:
        cfg = load_config(args)
        return COMMANDS[args.command](cfg, args)
    except (NumericalError, FloatingPointError, np.linalg.LinAlgError) as exc:
        print(f"error: numerical failure: {exc}", file=sys.stderr)
        return 2
    except (ConfigError, ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
