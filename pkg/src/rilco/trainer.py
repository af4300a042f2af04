"""Adversarial imitation trainers on tabular MDPs.

``train_ril_co`` runs the co-pseudo-labeling loop with two classifiers on
disjoint halves of the demonstrations.  ``train_baseline`` covers the
single-classifier variants (GAIL with logistic/unhinged/AP losses, naive
pseudo-labeling) and behavior cloning.

Training code only sees ``DemoDataset.samples``.  Anything that needs the
ground truth (true return, pseudo-label precision, kappa) goes through an
optional :class:`EvalMonitor`.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import asdict, dataclass, field, fields, replace

import numpy as np

from .demos import DemoDataset, Provenance, minibatch_indices, split_dataset
from .errors import ConfigError, DomainError
from .losses import LossSpec, as_loss, eval_loss
from .mdp import (MdpSpec, TabularPolicy, as_array, expected_return, occupancy_exact,
                  sample_from_density, sample_trajectories, softmax_policy, value_iteration)
from .pseudo import co_pseudo_label, self_pseudo_label
from .risk import Classifier, classifier_grad_step, empirical_risk_co, empirical_risk_pseudo
from .verify import kappa_estimate

METHODS = ("ril_co", "ril_p", "gail_logistic", "gail_unhinged", "gail_ap", "bc")
GAIL_LOSS = {"gail_logistic": "logistic", "gail_unhinged": "unhinged", "gail_ap": "ap"}
RL_MODES = ("exact", "reinforce")

# Batch sizes from the published setup; the desk defaults below are scaled down.
PAPER_BATCHES = {"batch_b": 640, "batch_u": 640, "batch_v": 640, "k": 128}
SCORE_WARNING = 1e3


@dataclass(frozen=True)
class TrainerConfig:
    method: str = "ril_co"
    lam: float = 0.5
    loss: str | None = None
    batch_b: int = 64
    batch_u: int = 64
    batch_v: int = 64
    k: int = 16
    classifier_step: float = 1e-2
    weight_decay: float = 1e-4
    classifier_steps: int = 1
    rl_mode: str = "exact"
    rl_step: float = 0.05
    rl_temperature: float = 0.05
    rl_trajectories: int = 16
    rl_horizon: int | None = None
    vi_tol: float = 1e-6
    iterations: int = 2000
    seed: int = 1
    lambda_anneal: tuple | None = None
    allow_nonsymmetric: bool = False
    relaxed_pseudo: bool = False
    trace: bool = False

    @property
    def resolved_loss(self) -> LossSpec:
        if self.method in GAIL_LOSS:
            return LossSpec(GAIL_LOSS[self.method])
        return as_loss(self.loss or "ap")

    def validate(self) -> "TrainerConfig":
        if self.method not in METHODS:
            raise ConfigError(f"unknown method {self.method!r}; expected one of {METHODS}")
        if self.method in GAIL_LOSS and self.loss not in (None, GAIL_LOSS[self.method]):
            raise ConfigError(f"{self.method} fixes the loss to {GAIL_LOSS[self.method]}")
        if self.loss is not None:
            as_loss(self.loss)
        if not 0.0 <= self.lam <= 1.0:
            raise ConfigError("lambda must lie in [0, 1]")
        for name in ("batch_b", "batch_u", "batch_v", "k", "iterations",
                     "classifier_steps", "rl_trajectories"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be positive")
        if self.k > self.batch_u or self.k > self.batch_v:
            raise ConfigError("k must not exceed the candidate batch sizes")
        if self.rl_mode not in RL_MODES:
            raise ConfigError(f"rl_mode must be one of {RL_MODES}")
        if self.rl_mode == "exact" and not 0.0 < self.rl_step <= 1.0:
            raise ConfigError("exact-mode rl_step must lie in (0, 1]")
        if self.classifier_step <= 0 or self.rl_step <= 0 or self.rl_temperature <= 0:
            raise ConfigError("step sizes and temperature must be positive")
        if self.weight_decay < 0:
            raise ConfigError("weight_decay must be >= 0")
        if (self.method in ("ril_co", "ril_p") and not self.resolved_loss.is_symmetric
                and not self.allow_nonsymmetric):
            raise ConfigError(f"{self.method} requires a symmetric loss "
                              f"(got {self.resolved_loss}); pass allow_nonsymmetric to override")
        if self.lambda_anneal is not None:
            start, end, n = self.lambda_anneal
            if not (0.0 <= start <= 1.0 and 0.0 <= end <= 1.0 and n >= 1):
                raise ConfigError("lambda_anneal must be (start, end, iterations) with values in [0, 1]")
        return self

    def lambda_at(self, it: int) -> float:
        if self.method in GAIL_LOSS:
            return 0.0
        if self.lambda_anneal is None:
            return self.lam
        start, end, n = self.lambda_anneal
        return start + (end - start) * min(1.0, it / n)

    def echo(self) -> dict:
        out = asdict(self)
        out["resolved_loss"] = str(self.resolved_loss)
        return out


def config_from_dict(d: dict) -> TrainerConfig:
    """Build a config from string-valued key=value pairs."""
    types = {f.name: f.type for f in fields(TrainerConfig)}
    kw = {}
    for key, raw in d.items():
        key = key.replace("-", "_")
        if key == "lambda":
            key = "lam"
        if key not in types:
            raise ConfigError(f"unknown config key {key!r}")
        if isinstance(raw, str):
            t = types[key]
            if raw in ("None", "none", ""):
                val = None
            elif "bool" in t:
                val = raw.lower() in ("1", "true", "yes")
            elif key == "lambda_anneal":
                parts = raw.split(",")
                val = (float(parts[0]), float(parts[1]), int(parts[2]))
            elif "int" in t and "float" not in t:
                val = int(raw)
            elif "float" in t:
                val = float(raw)
            else:
                val = raw
        else:
            val = raw
        if key == "method" and isinstance(val, str):
            val = val.replace("-", "_")
        kw[key] = val
    return TrainerConfig(**kw)


# --- records ---------------------------------------------------------------------

COLUMNS = ("iteration", "true_return", "total", "term_data", "term_pseudo", "term_policy",
           "lambda", "policy_objective", "pseudo_size", "pseudo_precision",
           "kappa_estimate", "kappa_residual", "max_abs_score")


@dataclass
class TrainRecord:
    method: str
    rows: list = field(default_factory=list)
    warnings: list = field(default_factory=list)
    flow: list = field(default_factory=list)

    def column(self, name) -> np.ndarray:
        return np.array([np.nan if r.get(name) is None else r[name] for r in self.rows], dtype=float)

    def final_return(self, frac: float = 0.1) -> float:
        """Mean true return over the last ``frac`` of the iterations."""
        ret = self.column("true_return")
        n = max(1, int(math.ceil(frac * len(ret))))
        return float(np.mean(ret[-n:]))

    def final_mean(self, name: str, frac: float = 0.1) -> float:
        col = self.column(name)
        n = max(1, int(math.ceil(frac * len(col))))
        tail = col[-n:]
        tail = tail[np.isfinite(tail)]
        return float(np.mean(tail)) if tail.size else float("nan")

    def to_csv(self) -> str:
        out = io.StringIO()
        w = csv.writer(out, lineterminator="\n")
        w.writerow(COLUMNS)
        for r in self.rows:
            w.writerow([_cell(r.get(c)) for c in COLUMNS])
        w.writerow(["summary", _cell(self.final_return())] + [""] * (len(COLUMNS) - 2))
        return out.getvalue()


def _cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def read_record_csv(text: str) -> tuple[list[dict], float | None]:
    """Rows and the summary value of a record CSV."""
    rows, summary = [], None
    for r in csv.DictReader(io.StringIO(text)):
        if r["iteration"] == "summary":
            summary = float(r["true_return"])
            continue
        rows.append({k: (float(v) if v not in ("", None) else None) for k, v in r.items()})
    return rows, summary


class EvalMonitor:
    """Evaluation-only view of the ground truth.

    Holds the expert/non-expert occupancies and the dataset provenance; the
    trainer passes it indices and densities and gets back diagnostics.  It
    never feeds anything back into training.
    """

    def __init__(self, rho_e=None, rho_n=None, provenance: Provenance | None = None):
        self.rho_e = None if rho_e is None else as_array(rho_e)
        self.rho_n = None if rho_n is None else as_array(rho_n)
        self.provenance = provenance

    def pseudo_precision(self, dataset_index) -> float | None:
        if self.provenance is None or len(dataset_index) == 0:
            return None
        return float(np.mean(self.provenance.is_nonexpert(dataset_index)))

    def kappa(self, rho_pi) -> tuple[float | None, float | None]:
        if self.rho_e is None or self.rho_n is None:
            return None, None
        try:
            return kappa_estimate(rho_pi, self.rho_e, self.rho_n)
        except DomainError:
            return None, None


# --- policy improvement ---------------------------------------------------------

def synth_reward(g: Classifier, x=None, *, allow_nonsymmetric: bool = False):
    """Reward l(-g(x)); with ``x=None`` the whole table."""
    if not g.loss.is_symmetric and not allow_nonsymmetric:
        raise DomainError(f"synthetic reward needs a symmetric loss, got {g.loss}")
    if x is None:
        return eval_loss(g.loss, -g.scores)
    x = np.asarray(x, dtype=np.int64)
    if x.ndim == 1:
        return float(eval_loss(g.loss, -g.scores[x[0], x[1]]))
    return eval_loss(g.loss, -g(x))


def exact_improvement(mdp: MdpSpec, policy, reward, step: float, temperature: float,
                      tol: float = 1e-6, q_init=None) -> tuple[TabularPolicy, np.ndarray]:
    """pi' = (1 - step) pi + step softmax(Q_r / temperature); also returns Q_r."""
    if not 0.0 < step <= 1.0:
        raise DomainError("exact-mode step must lie in (0, 1]")
    Q = value_iteration(mdp, tol=tol, reward=reward, q_init=q_init)
    target = softmax_policy(Q, temperature).probs
    pi = (1.0 - step) * as_array(policy) + step * target
    return TabularPolicy(pi / pi.sum(axis=1, keepdims=True)), Q


def reinforce_gradient(mdp: MdpSpec, policy, reward, batch) -> np.ndarray:
    """Discounted REINFORCE estimate of the logit gradient of (1-g) E[sum g^t r].

    Uses a per-state mean of the returns-to-go as baseline.
    """
    pi = as_array(policy)
    S, A = pi.shape
    st, ac = batch.states, batch.actions
    N, T = st.shape
    g = mdp.gamma
    r = np.asarray(reward)[st, ac]
    G = np.empty_like(r)
    acc = np.zeros(N)
    for t in range(T - 1, -1, -1):
        acc = r[:, t] + g * acc
        G[:, t] = acc
    flat_s = st.ravel()
    Gf = G.ravel()
    cnt = np.bincount(flat_s, minlength=S)
    base = np.bincount(flat_s, weights=Gf, minlength=S) / np.maximum(cnt, 1)
    w = (np.power(g, np.arange(T))[None, :] * (G - base[st])).ravel() * (1.0 - g) / N
    grad = np.zeros((S, A))
    np.add.at(grad, (flat_s, ac.ravel()), w)
    grad -= np.bincount(flat_s, weights=w, minlength=S)[:, None] * pi
    return grad


def reinforce_improvement(mdp: MdpSpec, policy, reward, step: float, batch) -> TabularPolicy:
    """One REINFORCE ascent step on tabular softmax logits."""
    logits = np.log(np.maximum(as_array(policy), 1e-300))
    logits = logits + step * reinforce_gradient(mdp, policy, reward, batch)
    return softmax_policy(logits, 1.0)


def rl_step(mdp: MdpSpec, policy, g: Classifier, mode: str = "exact", step: float = 0.05,
            batch=None, temperature: float = 0.05, tol: float = 1e-6,
            allow_nonsymmetric: bool = False) -> TabularPolicy:
    """Improve ``policy`` on the synthetic reward l(-g)."""
    reward = synth_reward(g, allow_nonsymmetric=allow_nonsymmetric)
    if mode == "exact":
        return exact_improvement(mdp, policy, reward, step, temperature, tol)[0]
    if mode == "reinforce":
        if batch is None:
            raise DomainError("reinforce mode needs a trajectory batch")
        return reinforce_improvement(mdp, policy, reward, step, batch)
    raise DomainError(f"unknown rl mode {mode!r}")


# --- training loops ---------------------------------------------------------------

class _Loop:
    """State shared by the adversarial trainers."""

    def __init__(self, mdp: MdpSpec, cfg: TrainerConfig, monitor: EvalMonitor | None):
        self.mdp = mdp
        self.cfg = cfg
        self.monitor = monitor or EvalMonitor()
        self.rng = np.random.default_rng(np.random.SeedSequence(cfg.seed))
        self.pi = TabularPolicy.uniform(*mdp.shape)
        self.q = None
        self.traj = None
        self.record = TrainRecord(cfg.method)

    def collect(self) -> np.ndarray:
        """On-policy batch B of size batch_b."""
        cfg = self.cfg
        if cfg.rl_mode == "exact":
            self.rho = occupancy_exact(self.mdp, self.pi).density
            return sample_from_density(self.rho, cfg.batch_b, self.rng)
        T = cfg.rl_horizon or self.mdp.horizon
        self.traj = sample_trajectories(self.mdp, self.pi, cfg.rl_trajectories, self.rng, T)
        self.rho = occupancy_exact(self.mdp, self.pi).density
        # discount-weighted timestep per draw
        g = self.mdp.gamma
        p = np.power(g, np.arange(T))
        t = self.rng.choice(T, size=cfg.batch_b, p=p / p.sum())
        n = self.rng.integers(0, cfg.rl_trajectories, size=cfg.batch_b)
        return np.stack([self.traj.states[n, t], self.traj.actions[n, t]], axis=1)

    def improve(self, g: Classifier):
        cfg = self.cfg
        reward = synth_reward(g, allow_nonsymmetric=cfg.allow_nonsymmetric or cfg.method in GAIL_LOSS)
        if cfg.rl_mode == "exact":
            self.pi, self.q = exact_improvement(self.mdp, self.pi, reward, cfg.rl_step,
                                                cfg.rl_temperature, cfg.vi_tol, self.q)
        else:
            self.pi = reinforce_improvement(self.mdp, self.pi, reward, cfg.rl_step, self.traj)

    def log(self, it, report, g, B, pseudo_index, n_pseudo):
        cfg = self.cfg
        kappa, resid = self.monitor.kappa(self.rho)
        lam = report.lam
        policy_obj = float(np.mean(synth_reward(g, B, allow_nonsymmetric=True)))
        row = {
            "iteration": it,
            "true_return": expected_return(self.mdp, self.pi),
            **report.as_row(),
            "policy_objective": policy_obj,
            "pseudo_size": n_pseudo,
            "pseudo_precision": self.monitor.pseudo_precision(pseudo_index),
            "kappa_estimate": kappa,
            "kappa_residual": resid,
            "max_abs_score": float(np.max(np.abs(g.scores))),
        }
        self.record.rows.append(row)

    def finish(self):
        """Append the return of the final policy and any warnings."""
        cfg = self.cfg
        peak = max(r["max_abs_score"] for r in self.record.rows)
        if peak > SCORE_WARNING:
            self.record.warnings.append(
                f"classifier score magnitude reached {peak:.3g} (> {SCORE_WARNING:g}); "
                f"loss {cfg.resolved_loss} with weight_decay={cfg.weight_decay:g} is diverging")
        return self.pi, self.record


def _step_classifier(g, data_fn, pseudo, B, lam, cfg):
    for _ in range(cfg.classifier_steps):
        g = classifier_grad_step(g, data_fn(), pseudo, B, lam, cfg.classifier_step, cfg.weight_decay)
    return g


def train_ril_co(mdp: MdpSpec, dataset: DemoDataset, cfg: TrainerConfig,
                 monitor: EvalMonitor | None = None) -> tuple[TabularPolicy, TrainRecord]:
    """Co-pseudo-labeling trainer.

    Each iteration: collect B on-policy samples; g2 labels negatives among U
    draws from D2 for g1 (P1) and g1 labels negatives among V draws from D1
    for g2 (P2); one gradient step per classifier on its own risk; one policy
    step on the reward l(-g1).
    """
    cfg = cfg.validate()
    if cfg.method != "ril_co":
        raise ConfigError(f"train_ril_co called with method {cfg.method!r}")
    loop = _Loop(mdp, cfg, monitor)
    rng = loop.rng
    split = split_dataset(dataset, rng)
    d1, d2 = split.d1.samples, split.d2.samples
    loss = cfg.resolved_loss
    g1 = Classifier.zeros(*mdp.shape, loss)
    g2 = Classifier.zeros(*mdp.shape, loss)

    for it in range(cfg.iterations):
        lam = cfg.lambda_at(it)
        B = loop.collect()
        u = minibatch_indices(len(d2), cfg.batch_u, rng)
        v = minibatch_indices(len(d1), cfg.batch_v, rng)
        P1 = co_pseudo_label(g2, d2[u], cfg.k, "from_d2", cfg.relaxed_pseudo)
        P2 = co_pseudo_label(g1, d1[v], cfg.k, "from_d1", cfg.relaxed_pseudo)
        if cfg.trace:
            loop.record.flow.append({
                "g1": {"data": "D1", "pseudo": P1.source, "pseudo_scorer": "g2", "policy": "B"},
                "g2": {"data": "D2", "pseudo": P2.source, "pseudo_scorer": "g1", "policy": "B"},
                "reward": "g1",
            })
        report = empirical_risk_co(g1, d1[minibatch_indices(len(d1), cfg.batch_b, rng)],
                                   P1.samples, B, lam)
        pseudo_index = np.concatenate([split.index2[u[P1.index]], split.index1[v[P2.index]]])
        loop.log(it, report, g1, B, pseudo_index, len(P1) + len(P2))

        g1_new = _step_classifier(
            g1, lambda: d1[minibatch_indices(len(d1), cfg.batch_b, rng)], P1.samples, B, lam, cfg)
        g2 = _step_classifier(
            g2, lambda: d2[minibatch_indices(len(d2), cfg.batch_b, rng)], P2.samples, B, lam, cfg)
        g1 = g1_new
        loop.improve(g1)
    return loop.finish()


def train_baseline(mdp: MdpSpec, dataset: DemoDataset, cfg: TrainerConfig,
                   monitor: EvalMonitor | None = None) -> tuple[TabularPolicy, TrainRecord]:
    """GAIL variants (lambda = 0, one classifier), naive pseudo-labeling, or BC."""
    cfg = cfg.validate()
    if cfg.method == "ril_co":
        raise ConfigError("use train_ril_co for ril_co")
    if cfg.method == "bc":
        return _train_bc(mdp, dataset, cfg, monitor)
    loop = _Loop(mdp, cfg, monitor)
    rng = loop.rng
    D = dataset.samples
    g = Classifier.zeros(*mdp.shape, cfg.resolved_loss)
    empty = np.empty((0, 2), dtype=np.int64)
    self_label = cfg.method == "ril_p"

    for it in range(cfg.iterations):
        lam = cfg.lambda_at(it)
        B = loop.collect()
        if self_label:
            u = minibatch_indices(len(D), cfg.batch_u, rng)
            P = self_pseudo_label(g, D[u], cfg.k, cfg.relaxed_pseudo)
            pseudo, pseudo_index = P.samples, u[P.index]
        else:
            pseudo, pseudo_index = empty, np.empty(0, dtype=np.int64)
        if cfg.trace:
            loop.record.flow.append({"g": {"data": "D", "pseudo": "self" if self_label else None,
                                           "pseudo_scorer": "g" if self_label else None,
                                           "policy": "B"}, "reward": "g"})
        report = empirical_risk_pseudo(g, D[minibatch_indices(len(D), cfg.batch_b, rng)],
                                       pseudo, B, lam)
        loop.log(it, report, g, B, pseudo_index, len(pseudo))
        g = _step_classifier(g, lambda: D[minibatch_indices(len(D), cfg.batch_b, rng)],
                             pseudo, B, lam, cfg)
        loop.improve(g)
    return loop.finish()


def fit_bc(dataset: DemoDataset, n_states: int, n_actions: int, smoothing: float = 1.0) -> TabularPolicy:
    """Count-based maximum-likelihood policy with additive smoothing."""
    s = dataset.samples
    counts = np.bincount(s[:, 0] * n_actions + s[:, 1], minlength=n_states * n_actions)
    counts = counts.reshape(n_states, n_actions) + smoothing
    return TabularPolicy(counts / counts.sum(axis=1, keepdims=True))


def _train_bc(mdp, dataset, cfg, monitor):
    pi = fit_bc(dataset, *mdp.shape)
    rho = occupancy_exact(mdp, pi).density
    kappa, resid = (monitor or EvalMonitor()).kappa(rho)
    rec = TrainRecord("bc")
    rec.rows.append({"iteration": 0, "true_return": expected_return(mdp, pi),
                     "kappa_estimate": kappa, "kappa_residual": resid})
    return pi, rec


def train(mdp: MdpSpec, dataset: DemoDataset, cfg: TrainerConfig,
          monitor: EvalMonitor | None = None) -> tuple[TabularPolicy, TrainRecord]:
    if cfg.method == "ril_co":
        return train_ril_co(mdp, dataset, cfg, monitor)
    return train_baseline(mdp, dataset, cfg, monitor)


def with_overrides(cfg: TrainerConfig, **kw) -> TrainerConfig:
    return replace(cfg, **kw)
