"""Command-line front end.

Exit codes: 0 success, 1 check or experiment failure, 2 usage error,
3 invariant violation.
"""
from __future__ import annotations

import argparse
import sys
from dataclasses import fields
from pathlib import Path

import numpy as np

from .demos import generate_noisy_dataset, load_dataset, load_provenance, save_dataset
from .errors import ConfigError, DomainError, InvariantError
from .mdp import (DEFAULT_TEMPERATURES, GOAL_MODES, dumps_policy, expected_return, gridworld,
                  load_mdp, random_mdp, save_mdp, snapshot_policies)
from .suite import registry
from .sweep import (PROFILES, SweepSpec, bar_chart_svg, evaluation_densities, profile_config,
                    read_sweep_csv, run_dir_name, run_sweep, write_sweep)
from .trainer import METHODS, EvalMonitor, TrainerConfig, config_from_dict, read_record_csv, train

OK, FAILED, USAGE, INVARIANT = 0, 1, 2, 3


class UsageError(Exception):
    pass


def _floats(text: str) -> list[float]:
    return [float(x) for x in text.split(",") if x.strip()]


def _ints(text: str) -> list[int]:
    return [int(x) for x in text.split(",") if x.strip()]


def _method(text: str) -> str:
    m = text.replace("-", "_")
    if m not in METHODS:
        raise argparse.ArgumentTypeError(f"unknown method {text!r}")
    return m


def read_config_file(path) -> dict:
    """Flat ``key = value`` text; ``#`` starts a comment."""
    out = {}
    for n, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{n}: expected key=value")
        k, v = line.split("=", 1)
        out[k.strip()] = v.strip()
    return out


def format_config(cfg: TrainerConfig, extra: dict) -> str:
    lines = [f"{k} = {v}" for k, v in extra.items()]
    for f in fields(TrainerConfig):
        v = getattr(cfg, f.name)
        if isinstance(v, tuple):
            v = ",".join(str(x) for x in v)
        lines.append(f"{f.name} = {v}")
    lines.append(f"resolved_loss = {cfg.resolved_loss}")
    return "\n".join(lines) + "\n"


# --- trainer flags ----------------------------------------------------------------

_TRAINER_FLAGS = [f.name for f in fields(TrainerConfig) if f.name not in ("method", "trace")]


def _add_trainer_flags(p: argparse.ArgumentParser):
    p.add_argument("--profile", choices=PROFILES, default="desk")
    p.add_argument("--config", help="key=value file; command-line flags take precedence")
    for name in _TRAINER_FLAGS:
        flag = "--" + ("lambda" if name == "lam" else name.replace("_", "-"))
        if name in ("allow_nonsymmetric", "relaxed_pseudo"):
            p.add_argument(flag, dest=name, action="store_const", const="true", default=None)
        else:
            p.add_argument(flag, dest=name, default=None)


def _trainer_overrides(args) -> dict:
    kw = read_config_file(args.config) if args.config else {}
    for name in _TRAINER_FLAGS:
        v = getattr(args, name, None)
        if v is not None:
            kw[name] = v
    return kw


def _resolve_config(args, method: str, seed: int | None = None) -> TrainerConfig:
    kw = _trainer_overrides(args)
    kw["method"] = method
    if seed is not None:
        kw["seed"] = seed
    parsed = config_from_dict({k: str(v) for k, v in kw.items()})
    explicit = {f.name: getattr(parsed, f.name) for f in fields(TrainerConfig)
                if f.name in {k.replace("-", "_") if k != "lambda" else "lam" for k in kw}}
    return profile_config(args.profile, **explicit).validate()


# --- subcommands -------------------------------------------------------------------

def cmd_gen_env(args) -> int:
    if args.family == "gridworld":
        if not 0.0 <= args.slip <= 1.0:
            raise UsageError("--slip must lie in [0, 1]")
        if not 0.0 < args.gamma < 1.0:
            raise UsageError("--gamma must lie in (0, 1)")
        if args.size < 2:
            raise UsageError("--size must be >= 2")
        mdp = gridworld(args.size, args.slip, args.gamma, goal=args.goal, goal_mode=args.goal_mode)
    else:
        if args.states < 1 or args.actions < 1:
            raise UsageError("--states and --actions must be positive")
        mdp = random_mdp(args.states, args.actions, args.gamma, args.seed)
    save_mdp(mdp, args.out)
    temps = _floats(args.temperatures) if args.temperatures else DEFAULT_TEMPERATURES
    snaps = snapshot_policies(mdp, temps)
    print(f"wrote {args.out}")
    print("snapshot,temperature,expected_return")
    for i, (t, p) in enumerate(zip(temps, snaps)):
        label = "expert" if i == 0 else f"snapshot{i}"
        print(f"{label},{t!r},{expected_return(mdp, p)!r}")
    return OK


def cmd_gen_demos(args) -> int:
    mdp = load_mdp(args.env)
    temps = _floats(args.temperatures) if args.temperatures else DEFAULT_TEMPERATURES
    snaps = snapshot_policies(mdp, temps)
    ds, prov = generate_noisy_dataset(mdp, snaps, args.n_expert, args.delta, args.seed)
    save_dataset(ds, args.out, prov)
    print(f"wrote {args.out} ({len(ds)} samples, expert fraction {prov.true_alpha:.4f})")
    return OK


def cmd_train(args) -> int:
    mdp = load_mdp(args.env)
    ds = load_dataset(args.demos)
    cfg = _resolve_config(args, args.method)
    # evaluation only: the sidecar and the snapshot densities feed diagnostics
    rho_e, rho_n, _ = evaluation_densities(mdp)
    monitor = EvalMonitor(rho_e, rho_n, load_provenance(args.demos))
    pi, rec = train(mdp, ds, cfg, monitor)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "record.csv").write_text(rec.to_csv())
    (out / "policy.txt").write_text(dumps_policy(pi))
    (out / "config.txt").write_text(format_config(cfg, {"env": args.env, "demos": args.demos,
                                                        "profile": args.profile}))
    for w in rec.warnings:
        print(f"warning: {w}", file=sys.stderr)
    print(f"final_return {rec.final_return()!r}")
    return OK


def cmd_sweep(args) -> int:
    mdp = load_mdp(args.env)
    overrides = {k: v for k, v in _trainer_overrides(args).items()}
    parsed = config_from_dict({k: str(v) for k, v in overrides.items()}) if overrides else None
    kw = {}
    if parsed is not None:
        names = {"lam" if k == "lambda" else k.replace("-", "_") for k in overrides}
        kw = {n: getattr(parsed, n) for n in names}
    kw.pop("seed", None)
    spec = SweepSpec(methods=tuple(args.methods), noise_rates=tuple(args.deltas),
                     seeds=tuple(args.seeds), profile=args.profile, n_expert=args.n_expert,
                     master_seed=args.master_seed, overrides=kw).validate()
    result = run_sweep(mdp, spec, args.workers)
    write_sweep(result, args.out)
    print("method,delta,mean_return,stderr,n_seeds")
    for a in result.aggregates():
        print(f'{a["method"]},{a["delta"]!r},{a["mean_return"]!r},{a["stderr"]!r},{a["n_seeds"]}')
    for r in result.failures:
        print(f"failed: {run_dir_name(r)}: {r.status}", file=sys.stderr)
    return FAILED if result.failures else OK


def cmd_verify(args) -> int:
    mdp = load_mdp(args.env)
    checks = registry(mdp, rollouts=args.rollouts)
    names = list(checks) if not args.checks else args.checks.split(",")
    unknown = [n for n in names if n not in checks]
    if unknown:
        raise UsageError(f"unknown checks {unknown}; available: {sorted(checks)}")
    reports = [r for n in names for r in checks[n]()]
    for r in reports:
        print(r.line())
    if args.csv:
        lines = ["check_name,passed,observed,threshold,details"]
        lines += [",".join(str(x) for x in r.csv_row()) for r in reports]
        Path(args.csv).write_text("\n".join(lines) + "\n")
    return OK if all(r.passed for r in reports) else FAILED


def cmd_report(args) -> int:
    src = Path(args.path)
    if (src / "sweep.csv").exists():
        runs, aggs = read_sweep_csv((src / "sweep.csv").read_text())
        # recompute aggregates from the per-run records
        mismatched = 0
        for r in runs:
            rec = src / "runs" / run_dir_name(r) / "record.csv"
            if r.status == "ok" and rec.exists():
                _, summary = read_record_csv(rec.read_text())
                mismatched += summary != r.final_return
        print("method,delta,mean_return,stderr,n_seeds")
        for a in aggs:
            print(f'{a["method"]},{a["delta"]!r},{a["mean_return"]!r},{a["stderr"]!r},{a["n_seeds"]}')
        svg = Path(args.svg) if args.svg else src / "chart.svg"
        svg.write_text(bar_chart_svg(aggs))
        if mismatched:
            print(f"{mismatched} run records disagree with sweep.csv", file=sys.stderr)
            return FAILED
        return OK
    if (src / "record.csv").exists():
        rows, summary = read_record_csv((src / "record.csv").read_text())
        last = rows[-max(1, len(rows) // 10):]

        def tail_mean(col):
            vals = [r[col] for r in last if r.get(col) is not None]
            return float(np.mean(vals)) if vals else float("nan")

        print(f"iterations {len(rows)}")
        print(f"final_return {summary!r}")
        for col in ("pseudo_precision", "kappa_estimate", "total"):
            print(f"{col} {tail_mean(col)!r}")
        return OK
    raise UsageError(f"{src} holds neither sweep.csv nor record.csv")


# --- parser -------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="rilco", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen-env", help="write an environment file")
    g.add_argument("family", choices=("gridworld", "random"))
    g.add_argument("--size", type=int, default=5)
    g.add_argument("--slip", type=float, default=0.1)
    g.add_argument("--gamma", type=float, default=0.95)
    g.add_argument("--goal", type=int, default=None)
    g.add_argument("--goal-mode", choices=GOAL_MODES, default="reset")
    g.add_argument("--states", type=int, default=10)
    g.add_argument("--actions", type=int, default=3)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--temperatures")
    g.add_argument("--out", required=True)
    g.set_defaults(func=cmd_gen_env)

    d = sub.add_parser("gen-demos", help="sample a noisy demonstration dataset")
    d.add_argument("--env", required=True)
    d.add_argument("--delta", type=float, default=0.0)
    d.add_argument("--n-expert", type=int, default=2000)
    d.add_argument("--seed", type=int, default=0)
    d.add_argument("--temperatures")
    d.add_argument("--out", required=True)
    d.set_defaults(func=cmd_gen_demos)

    t = sub.add_parser("train", help="train one method")
    t.add_argument("--env", required=True)
    t.add_argument("--demos", required=True)
    t.add_argument("--method", type=_method, default="ril_co")
    t.add_argument("--out", required=True)
    _add_trainer_flags(t)
    t.set_defaults(func=cmd_train)

    s = sub.add_parser("sweep", help="method x noise-rate x seed grid")
    s.add_argument("--env", required=True)
    s.add_argument("--methods", type=lambda x: [_method(m) for m in x.split(",")],
                   default=["ril_co", "gail_logistic"])
    s.add_argument("--deltas", type=_floats, default=[0.0, 0.1, 0.2, 0.3, 0.4])
    s.add_argument("--seeds", type=_ints, default=[1, 2, 3, 4, 5])
    s.add_argument("--n-expert", type=int, default=2000)
    s.add_argument("--master-seed", type=int, default=0)
    s.add_argument("--workers", type=int, default=None)
    s.add_argument("--out", required=True)
    _add_trainer_flags(s)
    s.set_defaults(func=cmd_sweep)

    v = sub.add_parser("verify", help="run the verification checks")
    v.add_argument("--env", required=True)
    v.add_argument("--checks", help="comma-separated subset")
    v.add_argument("--rollouts", type=int, default=100_000)
    v.add_argument("--csv")
    v.set_defaults(func=cmd_verify)

    r = sub.add_parser("report", help="summarize a run or sweep directory")
    r.add_argument("path")
    r.add_argument("--svg")
    r.set_defaults(func=cmd_report)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return USAGE if exc.code else OK
    try:
        return args.func(args)
    except InvariantError as exc:
        print(f"invariant violated: {exc.invariant}: {exc}", file=sys.stderr)
        return INVARIANT
    except (UsageError, ConfigError, DomainError, FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return USAGE


if __name__ == "__main__":
    sys.exit(main())
