"""Command-line simulator.

Flag names follow the original research harness, e.g.::

    customs-select --data synthetic --semi_supervised 0 --batch_size 512 \\
        --sampling hybrid --subsamplings DATE/bATE --weights 0.9/0.1 \\
        --mode scratch --train_from 20130101 --test_from 20130201 \\
        --test_length 7 --valid_length 28 --initial_inspection_rate 100 \\
        --final_inspection_rate 10 --epoch 10 --closs bce --rloss full \\
        --save 0 --numweeks 100 --inspection_plan fast_linear_decay
"""

from __future__ import annotations

import argparse
import datetime as dt
import json
import logging
import math
import os
import sys
from dataclasses import asdict
from pathlib import Path

from .ingest import DeclarationTable, parse_declarations, write_rejects
from .metrics import summarize, write_metric_series, write_reports
from .model import TrainConfig
from .selection import StrategySpec
from .simulate import POLICIES, SimulationConfig, Simulation, make_plan
from .synthgen import DriftEvent, GeneratorConfig, generate

OUTPUT_ENV = "CUSTOMS_SELECTION_OUTPUT"
SYNTHETIC_ITEMS_PER_WEEK = 100_000 / 52
DEFAULT_DRIFT = ("20:importer_resample:0.3", "36:country_remap:0.3")

log = logging.getLogger("customs_selection")


def _date(text: str) -> dt.date:
    try:
        return dt.datetime.strptime(text, "%Y%m%d").date()
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected YYYYMMDD, got {text!r}") from None


def _percent(text: str) -> float:
    value = float(text)
    if not 0 < value <= 100:
        raise argparse.ArgumentTypeError("inspection rates are percentages in (0, 100]")
    return value


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="customs-select",
        description="Simulate budget-constrained weekly customs inspection.",
        allow_abbrev=False,
    )
    p.add_argument("--data", default="synthetic", help="'synthetic' or path to a declaration CSV")
    p.add_argument("--semi_supervised", type=int, default=0, help="must be 0 (not supported)")
    p.add_argument("--batch_size", type=int, default=512)
    p.add_argument("--sampling", default="hybrid", help="random, DATE, badge, bATE, gATE or hybrid")
    p.add_argument("--subsamplings", default="DATE/gATE", help="hybrid children, '/'-separated")
    p.add_argument("--weights", default="0.9/0.1", help="hybrid budget shares, '/'-separated")
    p.add_argument("--mode", default="scratch", choices=["scratch"])
    p.add_argument("--train_from", type=_date, default=dt.date(2013, 1, 1))
    p.add_argument("--test_from", type=_date, default=dt.date(2013, 2, 1))
    p.add_argument("--test_length", type=int, default=7, help="days per simulated week")
    p.add_argument("--valid_length", type=int, default=28, help="validation window in days")
    p.add_argument("--initial_inspection_rate", type=_percent, default=100.0)
    p.add_argument("--final_inspection_rate", type=_percent, default=10.0)
    p.add_argument("--epoch", type=int, default=10)
    p.add_argument("--closs", default="bce", choices=["bce"])
    p.add_argument("--rloss", default="full", choices=["full"])
    p.add_argument("--save", type=int, default=0, choices=[0, 1], help="1 writes weekly model snapshots")
    p.add_argument("--numweeks", type=int, default=50)
    p.add_argument("--inspection_plan", default="fast_linear_decay", choices=list(POLICIES))
    p.add_argument("--lr", type=float, default=1e-3)
    p.add_argument("--rev_weight", type=float, default=1.0, help="weight of the revenue loss")
    p.add_argument("--dim", type=int, default=16, help="embedding width")
    p.add_argument("--theta", type=float, default=0.3, help="gATE threshold on validation Rev@n")
    p.add_argument("--gate_n", type=float, default=None, help="gATE Rev@n fraction (default: weekly rate)")
    p.add_argument("--first_pick", default="uniform", choices=["uniform", "max_norm"])
    p.add_argument("--risk_percentile", type=float, default=0.9)
    p.add_argument("--eval_from", type=int, default=None, help="first week of the headline average")
    p.add_argument("--seed", type=int, default=0, help="master seed")
    p.add_argument("--repeat", type=int, default=1, help="independent runs with seeds seed..seed+N-1")
    p.add_argument("--synthetic_config", default=None, help="key=value generator config file")
    p.add_argument("--synthetic_seed", type=int, default=7)
    p.add_argument("--drift", nargs="*", default=None, help="week:kind:fraction events for synthetic data")
    p.add_argument("--output_dir", default=None, help=f"output root (default ${OUTPUT_ENV} or .)")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def parse_cli(argv=None) -> argparse.Namespace:
    """Parse and cross-validate flags; invalid combinations exit with a usage error."""
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.semi_supervised != 0:
        parser.error("--semi_supervised is not supported; use 0")
    if args.final_inspection_rate > args.initial_inspection_rate:
        parser.error("--final_inspection_rate exceeds --initial_inspection_rate")
    if args.numweeks < 1 or args.repeat < 1 or args.epoch < 1 or args.batch_size < 1:
        parser.error("--numweeks, --repeat, --epoch and --batch_size must be positive")
    if args.test_from <= args.train_from:
        parser.error("--test_from must be after --train_from")
    try:
        args.strategy = StrategySpec.parse(
            args.sampling, args.subsamplings, args.weights,
            theta=args.theta, n=args.gate_n, first_pick=args.first_pick,
        )
    except ValueError as exc:
        parser.error(str(exc))
    try:
        args.drift_events = tuple(DriftEvent.parse(e) for e in (args.drift if args.drift is not None else DEFAULT_DRIFT))
    except ValueError as exc:
        parser.error(f"bad --drift: {exc}")
    return args


def synthetic_config(args) -> GeneratorConfig:
    """Generator sized to cover the training month plus every simulated week."""
    days = (args.test_from - args.train_from).days + args.numweeks * args.test_length
    weeks = math.ceil(days / 7)
    if args.synthetic_config:
        return GeneratorConfig.from_file(args.synthetic_config, start_date=args.train_from)
    drift = tuple(e for e in args.drift_events if e.week < weeks)
    return GeneratorConfig(
        num_items=round(SYNTHETIC_ITEMS_PER_WEEK * weeks),
        num_weeks=weeks,
        drift_schedule=drift,
        start_date=args.train_from,
        seed=args.synthetic_seed,
    )


def load_data(args, out_dir: Path, stem: str):
    if args.data == "synthetic":
        items = generate(synthetic_config(args))
    else:
        parsed = parse_declarations(args.data)
        if parsed.rejects:
            path = out_dir / f"{stem}.rejects.csv"
            write_rejects(parsed.rejects, path)
            log.warning("%d rows rejected, see %s", len(parsed.rejects), path)
        items = parsed.items
    return DeclarationTable.from_items(items)


def simulation_config(args, seed: int) -> SimulationConfig:
    plan = make_plan(
        args.inspection_plan,
        args.initial_inspection_rate / 100,
        args.final_inspection_rate / 100,
        args.numweeks,
    )
    return SimulationConfig(
        train_from=args.train_from,
        test_from=args.test_from,
        num_weeks=args.numweeks,
        plan=plan,
        strategy=args.strategy,
        train=TrainConfig(epochs=args.epoch, batch_size=args.batch_size, lr=args.lr, rev_weight=args.rev_weight, hidden=args.dim),
        test_length=args.test_length,
        valid_length=args.valid_length,
        seed=seed,
        risk_percentile=args.risk_percentile,
        eval_from=args.eval_from,
    )


def _data_name(args) -> str:
    return "synthetic" if args.data == "synthetic" else Path(args.data).stem


def _config_echo(args, cfg: SimulationConfig) -> dict:
    echo = {k: v for k, v in vars(args).items() if k not in ("strategy", "drift_events")}
    echo["drift"] = [str(e) for e in args.drift_events]
    echo.update(
        strategy=cfg.strategy.label(),
        seed=cfg.seed,
        rates=list(cfg.plan.rates),
        eval_from=cfg.evaluation_start,
        train=asdict(cfg.train),
    )
    return json.loads(json.dumps(echo, default=str))


def run_once(args, seed: int, out_root: Path) -> tuple[Path, object]:
    perf_dir = out_root / "results" / "performances"
    perf_dir.mkdir(parents=True, exist_ok=True)
    stem = f"{_data_name(args)}-{args.strategy.label().replace('/', '+')}-seed{seed}"
    table, vault = load_data(args, perf_dir, stem)
    cfg = simulation_config(args, seed)
    snap_dir = None
    if args.save:
        snap_dir = out_root / "results" / "models" / stem
        snap_dir.mkdir(parents=True, exist_ok=True)
    sim = Simulation(cfg, table, vault, snapshot_dir=snap_dir)
    reports = sim.run()
    if vault.violations:
        raise RuntimeError(f"label leakage audit failed: {vault.violations} hidden labels read")
    path = perf_dir / f"{stem}.csv"
    write_reports(reports, path)
    write_metric_series(reports, perf_dir, stem)
    (perf_dir / f"{stem}.config.json").write_text(json.dumps(_config_echo(args, cfg), indent=2, sort_keys=True) + "\n")
    return path, summarize(reports, cfg.evaluation_start)


def main(argv=None) -> int:
    args = parse_cli(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    out_root = Path(args.output_dir or os.environ.get(OUTPUT_ENV, "."))
    try:
        for seed in range(args.seed, args.seed + args.repeat):
            path, s = run_once(args, seed, out_root)
            print(f"{args.strategy.label()} seed={seed} -> {path}")
            print(f"  whole run   ({s.weeks} weeks): Norm-Rev={s.mean_norm_rev:.4f} Norm-Pre={s.mean_norm_pre:.4f}")
            print(
                f"  post-decay  ({s.post_decay_weeks} weeks): "
                f"Norm-Rev={s.post_decay_norm_rev:.4f} Norm-Pre={s.post_decay_norm_pre:.4f}"
            )
    except OSError as exc:
        where = exc.filename if exc.filename is not None else args.data
        print(f"error: cannot access {where}: {exc.strerror or exc}", file=sys.stderr)
        return 2
    except (ValueError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
