"""``qcd`` command line: validate, simulate, filter, risk, study.

Every command is a pure function of the config and seed; CSV output starts
with a ``# qcd-markov <version> config=<hash> seed=<seed>`` line and uses
17 significant digits for floats.

Exit status: 0 success, 1 invalid config or model, 2 runtime or model error.
"""

from __future__ import annotations

import argparse
import contextlib
import csv
import io
import math
import sys
import warnings
from dataclasses import replace
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import __version__
from .chain import relative_entropy_rate, stationary, structure
from .config import ExperimentConfig, load_config
from .detect import DetectorConfig, best_threshold, sweep_thresholds
from .diagnostics import FAMILIES, separation_report, supermartingale_study
from .errors import ConfigError, NotErgodic, QCDError, ValidationError
from .filtering import run_filter
from .model import Trajectory, simulate
from .seeding import derive_rng

EXIT_OK, EXIT_INVALID, EXIT_RUNTIME = 0, 1, 2


def fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return str(int(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return format(x, ".17g")


def header(cfg: ExperimentConfig, **extra) -> str:
    parts = [f"# qcd-markov {__version__}", f"config={cfg.config_hash()}", f"seed={cfg.run.master_seed}"]
    parts += [f"{k}={v}" for k, v in extra.items()]
    return " ".join(parts)


@contextlib.contextmanager
def _output(path: Optional[str]):
    if path is None or path == "-":
        yield sys.stdout
    else:
        with open(path, "w", newline="") as fh:
            yield fh


def _write_csv(path, head: str, columns: Sequence[str], rows) -> None:
    buf = io.StringIO()
    buf.write(head + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([fmt(x) if not isinstance(x, str) else x for x in row])
    with _output(path) as fh:
        fh.write(buf.getvalue())


def _effective_config(args) -> ExperimentConfig:
    cfg = load_config(args.config)
    run = cfg.run
    if args.seed is not None:
        run = replace(run, master_seed=args.seed)
    if args.trials is not None:
        run = replace(run, trials=args.trials)
    if args.horizon is not None:
        run = replace(run, horizon=args.horizon)
    # revalidate overrides through the same checks as the file
    return ExperimentConfig.from_dict({**cfg.to_dict(), "run": run.to_dict()})


def _simulate_from_config(cfg, model) -> Trajectory:
    rng = derive_rng(cfg.run.master_seed, "simulate", 0)
    return simulate(model, cfg.run.horizon, cfg.run.change_time, rng)


def cmd_validate(args) -> int:
    cfg = _effective_config(args)
    print(f"config: {args.config} (hash {cfg.config_hash()})")
    model = cfg.model.build(allow_nonergodic=args.allow_nonergodic)
    for name, A in (("A_b", model.before), ("A_a", model.after)):
        rep = structure(A)
        print(f"{name}: N={A.n} irreducible={rep.irreducible} aperiodic={rep.aperiodic} period={rep.period}")
    try:
        sep = separation_report(model)
    except NotErgodic as exc:
        print(f"separation: unavailable ({exc})")
        return EXIT_OK
    print(f"stationary(A_b): {np.array2string(stationary(model.before), precision=6)}")
    print(f"R(A_b|A_a) = {sep.rer_b_to_a:.6g}")
    print(f"R(A_a|A_b) = {sep.rer_a_to_b:.6g}")
    print(f"log(1/(1-rho)) = {sep.prior_bound:.6g}")
    if sep.sufficiently_separated:
        print(f"verdict: sufficiently separated (margin {sep.margin:.6g})")
    else:
        print(
            f"WARNING: insufficiently separated (margin {sep.margin:.6g}); the no-change "
            "posterior can collapse without a change. Consider a smaller rho."
        )
    return EXIT_OK


def cmd_simulate(args) -> int:
    cfg = _effective_config(args)
    model = cfg.model.build(allow_nonergodic=args.allow_nonergodic)
    traj = _simulate_from_config(cfg, model)
    nu = "never" if traj.change_time is None else traj.change_time
    rows = ((k, int(s), traj.regime(k)) for k, s in enumerate(traj.states))
    _write_csv(args.out, header(cfg, nu=nu), ["k", "state_index", "regime"], rows)
    return EXIT_OK


def read_trajectory(path: str) -> Trajectory:
    """Parse a CSV written by ``qcd simulate``."""
    lines = Path(path).read_text().splitlines()
    nu = None
    if lines and lines[0].startswith("#"):
        for tok in lines[0].split():
            if tok.startswith("nu=") and tok[3:] != "never":
                nu = int(tok[3:])
        lines = lines[1:]
    reader = csv.DictReader(lines)
    states = []
    for i, row in enumerate(reader):
        try:
            k, s = int(row["k"]), int(row["state_index"])
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"{path}: row {i}", "expected integer k and state_index") from exc
        if k != i:
            raise ConfigError(f"{path}: row {i}", f"k={k} out of sequence")
        states.append(s)
    if not states:
        raise ConfigError(path, "empty trajectory")
    return Trajectory(states=np.array(states, dtype=np.int64), change_time=nu)


def cmd_filter(args) -> int:
    cfg = _effective_config(args)
    model = cfg.model.build(allow_nonergodic=args.allow_nonergodic)
    if args.trajectory:
        traj = read_trajectory(args.trajectory)
        bad = [s for s in traj.states if not 0 <= s < model.n]
        if bad:
            raise ConfigError(args.trajectory, f"state index {bad[0]} outside [0, {model.n})")
    else:
        traj = _simulate_from_config(cfg, model)
    trace = run_filter(model, traj, args.mode)
    h = cfg.detection.threshold_h
    columns = ["k", "m_b", "log_m_b", "alarm"]
    if args.mode == "both":
        columns.append("discrepancy")

    def rows():
        for k, p in enumerate(trace.posteriors):
            row = [k, p.m_b, p.log_m_b, int(k >= 1 and p.m_b <= h)]
            if trace.discrepancy is not None:
                row.append(trace.discrepancy[k])
            yield row

    _write_csv(args.out, header(cfg, mode=args.mode), columns, rows())
    return EXIT_OK


def _parse_thresholds(raw: Optional[str], default: float) -> list[float]:
    if raw is None:
        return [default]
    out = []
    for i, tok in enumerate(t for t in raw.split(",") if t.strip()):
        try:
            out.append(float(tok))
        except ValueError as exc:
            raise ConfigError(f"--thresholds[{i}]", f"not a number: {tok!r}") from exc
    return out


def cmd_risk(args) -> int:
    cfg = _effective_config(args)
    model = cfg.model.build(allow_nonergodic=args.allow_nonergodic)
    thresholds = _parse_thresholds(args.thresholds, cfg.detection.threshold_h)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        estimates = sweep_thresholds(
            model, cfg.detection.cost_c, thresholds, cfg.run.trials, cfg.run.horizon, cfg.run.master_seed
        )
    for w in caught:
        print(f"warning: {w.message}", file=sys.stderr)
    columns = ["h", "mean_delay", "delay_se", "pfa", "pfa_se", "bayes_risk", "censored_count", "zero_delay_count"]
    rows = (
        [e.threshold_h, e.mean_delay, e.std_errors["delay"], e.false_alarm_prob,
         e.std_errors["false_alarm"], e.bayes_risk, e.censored, e.zero_delay]
        for e in estimates
    )
    _write_csv(args.out, header(cfg, c=fmt(cfg.detection.cost_c)), columns, rows)
    if estimates:
        best = best_threshold(estimates)
        print(f"lowest estimated risk: h={best.threshold_h:g} J={best.bayes_risk:.6g}", file=sys.stderr)
    return EXIT_OK


def cmd_study(args) -> int:
    cfg = _effective_config(args)
    if cfg.study is None:
        raise ConfigError("study", "missing; the study command needs a study block")
    model = cfg.model.build(allow_nonergodic=args.allow_nonergodic)
    family = FAMILIES[cfg.study.family]
    grid = cfg.study.values()
    result = supermartingale_study(
        model.before, family, grid, model.rho, cfg.run.trials, cfg.run.horizon,
        cfg.study.h_report, cfg.run.master_seed, initial=cfg.model.initial,
    )
    rows = []
    for a, freq in zip(grid, result.trap_frequency):
        rer = relative_entropy_rate(model.before, family(a))
        verdict = "sufficient" if rer >= -math.log1p(-model.rho) else "insufficient"
        rows.append([a, rer, verdict, freq])
    _write_csv(args.out, header(cfg, trials=cfg.run.trials, horizon=cfg.run.horizon),
               ["a", "rer", "verdict", "trap_frequency"], rows)
    return EXIT_OK


COMMANDS = {
    "validate": cmd_validate,
    "simulate": cmd_simulate,
    "filter": cmd_filter,
    "risk": cmd_risk,
    "study": cmd_study,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qcd", description="Bayesian quickest change detection for Markov chains")
    parser.add_argument("--version", action="version", version=f"qcd-markov {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="JSON config path or bundled scenario name")
        p.add_argument("--seed", type=int, help="override run.master_seed")
        p.add_argument("--out", help="output CSV path (default: stdout)")
        p.add_argument("--trials", type=int, help="override run.trials")
        p.add_argument("--horizon", type=int, help="override run.horizon")
        p.add_argument("--allow-nonergodic", action="store_true")
        if name == "filter":
            p.add_argument("--mode", choices=["scalar", "full", "both"], default="scalar")
            p.add_argument("--trajectory", help="trajectory CSV from `qcd simulate`; simulated if omitted")
        if name == "risk":
            p.add_argument("--thresholds", help="comma-separated list; default detection.threshold_h")
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except (ValidationError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (QCDError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
