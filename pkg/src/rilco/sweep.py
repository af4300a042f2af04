"""Grid experiments over (method, noise rate, seed) and their reports."""
from __future__ import annotations

import csv
import io
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .demos import generate_noisy_dataset, save_dataset
from .errors import ConfigError
from .mdp import DEFAULT_TEMPERATURES, MdpSpec, dumps_policy, expected_return, occupancy_exact, snapshot_policies
from .trainer import METHODS, PAPER_BATCHES, EvalMonitor, TrainerConfig, train

NOISE_RATES = (0.0, 0.1, 0.2, 0.3, 0.4)
SEEDS = (1, 2, 3, 4, 5)
PROFILES = ("desk", "paper_faithful")

# Desk hyperparameters tuned on the benchmark gridworld; see the README.
DESK = {"batch_b": 64, "batch_u": 64, "batch_v": 64, "k": 16, "iterations": 2000,
        "classifier_step": 5.0, "rl_step": 0.05, "rl_temperature": 0.02}


def profile_config(profile: str = "desk", **overrides) -> TrainerConfig:
    if profile not in PROFILES:
        raise ConfigError(f"profile must be one of {PROFILES}")
    base = dict(DESK)
    if profile == "paper_faithful":
        base.update(PAPER_BATCHES)
    base.update(overrides)
    return TrainerConfig(**base)


def evaluation_densities(mdp: MdpSpec, temperatures=DEFAULT_TEMPERATURES):
    """Expert occupancy, mean non-expert occupancy and the snapshot policies."""
    snaps = snapshot_policies(mdp, temperatures)
    rho_e = occupancy_exact(mdp, snaps[0]).density
    rho_n = np.mean([occupancy_exact(mdp, p).density for p in snaps[1:]], axis=0)
    return rho_e, rho_n, snaps


def cell_seeds(master_seed: int, delta: float, seed: int) -> tuple[int, int]:
    """Dataset and trainer seeds of one grid cell.

    Every method at the same (delta, seed) sees the same dataset and trainer
    stream, so method comparisons use common random numbers.
    """
    ss = np.random.SeedSequence([int(master_seed), int(round(delta * 1e6)), int(seed)])
    data_seed, train_seed = ss.generate_state(2)
    return int(data_seed), int(train_seed)


@dataclass(frozen=True)
class SweepSpec:
    methods: tuple = ("ril_co", "gail_logistic")
    noise_rates: tuple = NOISE_RATES
    seeds: tuple = SEEDS
    profile: str = "desk"
    n_expert: int = 2000
    master_seed: int = 0
    overrides: dict = field(default_factory=dict)  # applied to every cell
    method_overrides: dict = field(default_factory=dict)  # label -> dict

    def validate(self) -> "SweepSpec":
        if not self.seeds:
            raise ConfigError("seeds must be non-empty")
        for d in self.noise_rates:
            if not 0.0 <= d < 0.5:
                raise ConfigError(f"noise rate {d} outside [0, 0.5)")
        for m in self.methods:
            if _base_method(m, self.method_overrides) not in METHODS:
                raise ConfigError(f"unknown method {m!r}")
        if self.profile not in PROFILES:
            raise ConfigError(f"profile must be one of {PROFILES}")
        return self

    def config_for(self, label: str, seed: int) -> TrainerConfig:
        kw = {**self.overrides, **self.method_overrides.get(label, {})}
        kw.setdefault("method", label)
        return profile_config(self.profile, **kw, seed=seed)


def _base_method(label, method_overrides):
    return method_overrides.get(label, {}).get("method", label)


@dataclass
class RunResult:
    method: str
    delta: float
    seed: int
    final_return: float
    status: str = "ok"
    record_csv: str = ""
    policy_text: str = ""
    warnings: tuple = ()


def run_cell(mdp: MdpSpec, spec: SweepSpec, label: str, delta: float, seed: int,
             densities=None) -> RunResult:
    """Generate the cell's dataset and train one method on it."""
    try:
        rho_e, rho_n, snaps = densities or evaluation_densities(mdp)
        data_seed, train_seed = cell_seeds(spec.master_seed, delta, seed)
        ds, prov = generate_noisy_dataset(mdp, snaps, spec.n_expert, delta, data_seed)
        cfg = spec.config_for(label, train_seed)
        pi, rec = train(mdp, ds, cfg, EvalMonitor(rho_e, rho_n, prov))
        return RunResult(label, delta, seed, rec.final_return(), "ok", rec.to_csv(),
                         dumps_policy(pi), tuple(rec.warnings))
    except Exception as exc:  # a failed cell is recorded, the sweep goes on
        return RunResult(label, delta, seed, float("nan"), f"failed: {type(exc).__name__}: {exc}")


def _cell_job(args):
    return run_cell(*args)


def worker_count(requested: int | None = None) -> int:
    n = requested or os.cpu_count() or 1
    cap = os.environ.get("RIL_THREADS")
    if cap:
        n = min(n, max(1, int(cap)))
    return max(1, n)


@dataclass
class SweepResult:
    spec: SweepSpec
    runs: list
    expert_return: float

    def aggregates(self) -> list[dict]:
        out = []
        for m in self.spec.methods:
            for d in self.spec.noise_rates:
                vals = np.array([r.final_return for r in self.runs
                                 if r.method == m and r.delta == d and r.status == "ok"])
                n = len(vals)
                mean = float(vals.mean()) if n else float("nan")
                se = float(vals.std(ddof=1) / math.sqrt(n)) if n > 1 else float("nan")
                out.append({"method": m, "delta": d, "mean_return": mean, "stderr": se, "n_seeds": n})
        return out

    def aggregate(self, method: str, delta: float) -> dict:
        for a in self.aggregates():
            if a["method"] == method and a["delta"] == delta:
                return a
        raise KeyError((method, delta))

    @property
    def failures(self) -> list:
        return [r for r in self.runs if r.status != "ok"]

    def to_csv(self) -> str:
        return sweep_csv(self.runs, self.aggregates())


SWEEP_COLUMNS = ("kind", "method", "delta", "seed", "final_return", "mean_return", "stderr",
                 "n_seeds", "status")


def _num(x) -> str:
    return "" if x is None else repr(float(x))


def sweep_csv(runs, aggregates) -> str:
    out = io.StringIO()
    w = csv.writer(out, lineterminator="\n")
    w.writerow(SWEEP_COLUMNS)
    for r in runs:
        w.writerow(["run", r.method, repr(float(r.delta)), r.seed, _num(r.final_return),
                    "", "", "", r.status])
    for a in aggregates:
        w.writerow(["aggregate", a["method"], repr(float(a["delta"])), "", "",
                    _num(a["mean_return"]), _num(a["stderr"]), a["n_seeds"], ""])
    return out.getvalue()


def run_sweep(mdp: MdpSpec, spec: SweepSpec, workers: int | None = None) -> SweepResult:
    """Run every (method, delta, seed) cell, concurrently when ``workers > 1``."""
    spec = spec.validate()
    dens = evaluation_densities(mdp)
    cells = [(label, d, s) for label in spec.methods for d in spec.noise_rates for s in spec.seeds]
    jobs = [(mdp, spec, label, d, s, dens) for label, d, s in cells]
    n = min(worker_count(workers), len(jobs))
    if n <= 1:
        runs = [_cell_job(j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=n) as pool:
            runs = list(pool.map(_cell_job, jobs))
    return SweepResult(spec, runs, expected_return(mdp, dens[2][0]))


def run_dir_name(r: RunResult) -> str:
    return f"{r.method}_d{r.delta:g}_s{r.seed}"


def write_sweep(result: SweepResult, out_dir) -> Path:
    """sweep.csv, chart.svg and one run directory per cell."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for r in result.runs:
        d = out / "runs" / run_dir_name(r)
        d.mkdir(parents=True, exist_ok=True)
        if r.status == "ok":
            (d / "record.csv").write_text(r.record_csv)
            (d / "policy.txt").write_text(r.policy_text)
        (d / "status.txt").write_text(r.status + "\n")
    (out / "sweep.csv").write_text(result.to_csv())
    (out / "chart.svg").write_text(bar_chart_svg(result.aggregates(), result.expert_return))
    return out


def read_sweep_csv(text: str):
    runs, aggs = [], []
    for row in csv.DictReader(io.StringIO(text)):
        if row["kind"] == "run":
            runs.append(RunResult(row["method"], float(row["delta"]), int(row["seed"]),
                                  float(row["final_return"]), row["status"]))
        else:
            aggs.append({"method": row["method"], "delta": float(row["delta"]),
                         "mean_return": float(row["mean_return"]),
                         "stderr": float(row["stderr"]) if row["stderr"] else float("nan"),
                         "n_seeds": int(row["n_seeds"])})
    return runs, aggs


# --- chart ------------------------------------------------------------------

PALETTE = ("#1b6ca8", "#d1495b", "#edae49", "#66a182", "#8d6a9f", "#2e4057")


def bar_chart_svg(aggregates, expert_return: float | None = None, title: str = "Final return by noise rate") -> str:
    """Grouped bars (one group per noise rate) with standard-error whiskers."""
    methods = list(dict.fromkeys(a["method"] for a in aggregates))
    deltas = sorted(set(a["delta"] for a in aggregates))
    lookup = {(a["method"], a["delta"]): a for a in aggregates}
    W, H, left, bottom, top = 640, 360, 60, 50, 40
    plot_w, plot_h = W - left - 20, H - bottom - top
    hi = max([a["mean_return"] + (a["stderr"] if a["stderr"] == a["stderr"] else 0)
              for a in aggregates if a["mean_return"] == a["mean_return"]] + [expert_return or 0, 1e-9])
    hi *= 1.1

    def y(v):
        return top + plot_h * (1 - v / hi)

    group_w = plot_w / max(len(deltas), 1)
    bar_w = group_w * 0.8 / max(len(methods), 1)
    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" font-family="sans-serif" font-size="11">',
             "<!-- data: method,delta,mean_return,stderr,n_seeds",
             *[f'{a["method"]},{a["delta"]!r},{a["mean_return"]!r},{a["stderr"]!r},{a["n_seeds"]}' for a in aggregates],
             "-->",
             f'<text x="{W / 2}" y="20" text-anchor="middle" font-size="14">{title}</text>',
             f'<line x1="{left}" y1="{top + plot_h}" x2="{left + plot_w}" y2="{top + plot_h}" stroke="black"/>',
             f'<line x1="{left}" y1="{top}" x2="{left}" y2="{top + plot_h}" stroke="black"/>']
    for i in range(6):
        v = hi * i / 5
        parts.append(f'<text x="{left - 5}" y="{y(v) + 4:.1f}" text-anchor="end">{v:.2f}</text>')
    if expert_return:
        parts.append(f'<line x1="{left}" y1="{y(expert_return):.1f}" x2="{left + plot_w}" '
                     f'y2="{y(expert_return):.1f}" stroke="gray" stroke-dasharray="4 3"/>')
        parts.append(f'<text x="{left + plot_w}" y="{y(expert_return) - 4:.1f}" text-anchor="end" fill="gray">expert</text>')
    for gi, d in enumerate(deltas):
        x0 = left + gi * group_w + group_w * 0.1
        parts.append(f'<text x="{x0 + group_w * 0.4:.1f}" y="{top + plot_h + 16}" text-anchor="middle">δ={d:g}</text>')
        for mi, m in enumerate(methods):
            a = lookup.get((m, d))
            if a is None or a["mean_return"] != a["mean_return"]:
                continue
            x = x0 + mi * bar_w
            v = max(a["mean_return"], 0.0)
            parts.append(f'<rect x="{x:.1f}" y="{y(v):.1f}" width="{bar_w * 0.9:.1f}" '
                         f'height="{top + plot_h - y(v):.1f}" fill="{PALETTE[mi % len(PALETTE)]}"/>')
            se = a["stderr"]
            if se == se and se > 0:
                cx = x + bar_w * 0.45
                parts.append(f'<line x1="{cx:.1f}" y1="{y(v + se):.1f}" x2="{cx:.1f}" y2="{y(max(v - se, 0)):.1f}" stroke="black"/>')
    for mi, m in enumerate(methods):
        lx = left + 10 + mi * 110
        parts.append(f'<rect x="{lx}" y="{H - 18}" width="10" height="10" fill="{PALETTE[mi % len(PALETTE)]}"/>')
        parts.append(f'<text x="{lx + 14}" y="{H - 9}">{m}</text>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def with_spec(spec: SweepSpec, **kw) -> SweepSpec:
    return replace(spec, **kw)
