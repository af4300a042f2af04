"""Finite MDPs: occupancy measures, planning, and trajectory sampling.

Conventions
-----------
States and actions are integer indices.  ``transition[s, a, s2]`` is
``p(s2 | s, a)``.  A state-action *density* is the normalized discounted
occupancy ``rho(s, a) = (1 - gamma) * E[sum_t gamma^(t-1) 1{s_t=s, a_t=a}]``,
so it sums to one.
"""
from __future__ import annotations

import io
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import linalg

from .errors import DomainError, InvariantError

ROW_TOL = 1e-12
DENSITY_TOL = 1e-9

INFINITE = "infinite_horizon"
FINITE = "finite_horizon"


def _readonly(a, dtype=float):
    a = np.array(a, dtype=dtype, copy=True)
    a.setflags(write=False)
    return a


def horizon_for(gamma: float, eps: float = 1e-8) -> int:
    """Smallest T with gamma**T < eps."""
    return int(math.floor(math.log(eps) / math.log(gamma))) + 1


@dataclass(frozen=True, eq=False)
class MdpSpec:
    transition: np.ndarray
    initial: np.ndarray
    reward: np.ndarray
    gamma: float
    horizon: int

    def __post_init__(self):
        P = _readonly(self.transition)
        p1 = _readonly(self.initial)
        r = _readonly(self.reward)
        object.__setattr__(self, "transition", P)
        object.__setattr__(self, "initial", p1)
        object.__setattr__(self, "reward", r)
        object.__setattr__(self, "gamma", float(self.gamma))
        object.__setattr__(self, "horizon", int(self.horizon))

        if P.ndim != 3 or P.shape[0] != P.shape[2]:
            raise InvariantError("transition_shape", f"expected [S][A][S], got {P.shape}")
        S, A, _ = P.shape
        if S < 1 or A < 1:
            raise InvariantError("transition_shape", "need at least one state and action")
        if p1.shape != (S,):
            raise InvariantError("initial_shape", f"expected ({S},), got {p1.shape}")
        if r.shape != (S, A):
            raise InvariantError("reward_shape", f"expected ({S}, {A}), got {r.shape}")
        if not np.all(np.isfinite(P)) or np.any(P < 0):
            raise InvariantError("transition_nonnegative", "transition entries must be finite and >= 0")
        bad = np.abs(P.sum(axis=2) - 1.0) > ROW_TOL
        if np.any(bad):
            s, a = np.argwhere(bad)[0]
            raise InvariantError(
                "transition_rows_sum_to_one",
                f"row (s={s}, a={a}) sums to {P[s, a].sum()!r}",
            )
        if not np.all(np.isfinite(p1)) or np.any(p1 < 0) or abs(p1.sum() - 1.0) > ROW_TOL:
            raise InvariantError("initial_is_distribution", f"initial sums to {p1.sum()!r}")
        if not np.all(np.isfinite(r)):
            raise InvariantError("reward_finite", "reward table has non-finite entries")
        if not 0.0 < self.gamma < 1.0:
            raise InvariantError("gamma_range", f"gamma must lie in (0, 1), got {self.gamma}")
        if self.horizon < 1:
            raise InvariantError("horizon_positive", f"horizon must be >= 1, got {self.horizon}")

    @property
    def n_states(self) -> int:
        return self.transition.shape[0]

    @property
    def n_actions(self) -> int:
        return self.transition.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.n_states, self.n_actions

    def with_reward(self, reward) -> "MdpSpec":
        return MdpSpec(self.transition, self.initial, reward, self.gamma, self.horizon)


@dataclass(frozen=True, eq=False)
class TabularPolicy:
    probs: np.ndarray

    def __post_init__(self):
        p = _readonly(self.probs)
        object.__setattr__(self, "probs", p)
        if p.ndim != 2:
            raise InvariantError("policy_shape", f"expected [S][A], got {p.shape}")
        if np.any(p < 0) or np.any(np.abs(p.sum(axis=1) - 1.0) > ROW_TOL):
            raise InvariantError("policy_rows_sum_to_one", "policy rows must be distributions")

    @classmethod
    def uniform(cls, n_states: int, n_actions: int) -> "TabularPolicy":
        return cls(np.full((n_states, n_actions), 1.0 / n_actions))

    @classmethod
    def from_probs(cls, probs) -> "TabularPolicy":
        """Build from an (approximately) stochastic table, renormalizing rows."""
        p = np.clip(np.asarray(probs, dtype=float), 0.0, None)
        return cls(p / p.sum(axis=1, keepdims=True))

    @property
    def shape(self):
        return self.probs.shape


@dataclass(frozen=True, eq=False)
class StateActionDensity:
    density: np.ndarray
    normalization_mode: str = INFINITE

    def __post_init__(self):
        d = _readonly(self.density)
        object.__setattr__(self, "density", d)
        if d.ndim != 2:
            raise InvariantError("density_shape", f"expected [S][A], got {d.shape}")
        if np.any(d < -DENSITY_TOL) or abs(d.sum() - 1.0) > DENSITY_TOL:
            raise InvariantError("density_normalized", f"density sums to {d.sum()!r}")

    @property
    def state_marginal(self) -> np.ndarray:
        return self.density.sum(axis=1)

    @property
    def shape(self):
        return self.density.shape


def as_array(x) -> np.ndarray:
    """Underlying table of a density/policy, or the array itself."""
    if isinstance(x, StateActionDensity):
        return x.density
    if isinstance(x, TabularPolicy):
        return x.probs
    return np.asarray(x, dtype=float)


@dataclass(frozen=True)
class Trajectory:
    states: np.ndarray
    actions: np.ndarray

    @property
    def steps(self) -> list[tuple[int, int]]:
        return list(zip(self.states.tolist(), self.actions.tolist()))

    def __len__(self):
        return len(self.states)


@dataclass(frozen=True)
class TrajectoryBatch:
    """``count`` trajectories stored as two ``(count, T)`` integer arrays."""

    states: np.ndarray
    actions: np.ndarray

    def __len__(self):
        return self.states.shape[0]

    def __getitem__(self, i) -> Trajectory:
        return Trajectory(self.states[i], self.actions[i])

    def __iter__(self):
        for i in range(len(self)):
            yield self[i]

    @property
    def horizon(self) -> int:
        return self.states.shape[1]


# --- exact quantities --------------------------------------------------------

def state_transition_matrix(mdp: MdpSpec, policy) -> np.ndarray:
    """P_pi[s, s2] = sum_a pi(a|s) p(s2|s, a)."""
    return np.einsum("sa,sat->st", as_array(policy), mdp.transition)


def state_occupancy(mdp: MdpSpec, policy) -> np.ndarray:
    """Discounted state distribution d solving d = (1-g) p1 + g P_pi^T d."""
    P_pi = state_transition_matrix(mdp, policy)
    M = np.eye(mdp.n_states) - mdp.gamma * P_pi.T
    try:
        d = linalg.solve(M, (1.0 - mdp.gamma) * mdp.initial, check_finite=False)
    except linalg.LinAlgError as exc:  # pragma: no cover - gamma < 1 makes M invertible
        raise ArithmeticError("occupancy linear system is singular") from exc
    return np.clip(d, 0.0, None)


def occupancy_exact(mdp: MdpSpec, policy, mode: str = INFINITE) -> StateActionDensity:
    """Normalized state-action occupancy of ``policy``.

    ``infinite_horizon`` solves the discounted flow equation directly.
    ``finite_horizon`` accumulates the forward recursion for t = 1..T and
    rescales by (1-gamma)/(1-gamma^T) so the table sums to one.
    """
    pi = as_array(policy)
    if mode == INFINITE:
        d = state_occupancy(mdp, pi)
        rho = d[:, None] * pi
    elif mode == FINITE:
        P_pi = state_transition_matrix(mdp, pi)
        d_t = mdp.initial.copy()
        acc = np.zeros(mdp.n_states)
        w = 1.0
        for _ in range(mdp.horizon):
            acc += w * d_t
            d_t = d_t @ P_pi
            w *= mdp.gamma
        acc *= (1.0 - mdp.gamma) / (1.0 - mdp.gamma ** mdp.horizon)
        rho = acc[:, None] * pi
    else:
        raise DomainError(f"unknown normalization mode {mode!r}")
    return StateActionDensity(rho / rho.sum(), mode)


def flow_residual(mdp: MdpSpec, policy, rho) -> float:
    """max_s |d(s) - (1-g) p1(s) - g (P_pi^T d)(s)| with d the state marginal of rho."""
    d = as_array(rho).sum(axis=1)
    P_pi = state_transition_matrix(mdp, policy)
    return float(np.max(np.abs(d - (1.0 - mdp.gamma) * mdp.initial - mdp.gamma * P_pi.T @ d)))


def expected_return(mdp: MdpSpec, policy, reward=None) -> float:
    """Expected discounted return, sum_x rho(x) r(x) / (1 - gamma)."""
    r = mdp.reward if reward is None else np.asarray(reward, dtype=float)
    rho = occupancy_exact(mdp, policy).density
    return float(np.sum(rho * r) / (1.0 - mdp.gamma))


def policy_from_density(rho) -> TabularPolicy:
    """pi(a|s) = rho(s, a) / rho(s); states without mass get the uniform row."""
    d = as_array(rho)
    marg = d.sum(axis=1, keepdims=True)
    A = d.shape[1]
    with np.errstate(invalid="ignore", divide="ignore"):
        pi = np.where(marg > 0, d / marg, 1.0 / A)
    return TabularPolicy.from_probs(pi)


def bellman_optimality(mdp: MdpSpec, Q: np.ndarray, reward=None) -> np.ndarray:
    r = mdp.reward if reward is None else reward
    return r + mdp.gamma * mdp.transition @ Q.max(axis=1)


def value_iteration(mdp: MdpSpec, tol: float = 1e-8, reward=None, q_init=None,
                    max_iter: int = 100_000) -> np.ndarray:
    """Optimal Q-table with sup-norm Bellman residual <= tol.

    ``reward`` overrides the MDP's own reward table (used for synthetic
    rewards).  ``q_init`` warm-starts the iteration.
    """
    if tol <= 0:
        raise DomainError("tol must be positive")
    r = mdp.reward if reward is None else np.asarray(reward, dtype=float)
    Q = np.zeros(mdp.shape) if q_init is None else np.array(q_init, dtype=float)
    P = mdp.transition
    g = mdp.gamma
    for _ in range(max_iter):
        Q_new = r + g * (P @ Q.max(axis=1))
        resid = np.max(np.abs(Q_new - Q))
        Q = Q_new
        # residual of the returned Q is at most gamma * resid
        if g * resid <= tol:
            return Q
    raise ArithmeticError("value iteration did not converge")  # pragma: no cover


def greedy_policy(Q: np.ndarray, atol: float = 1e-9) -> TabularPolicy:
    """Uniform over actions within ``atol`` of the row maximum."""
    best = Q >= Q.max(axis=1, keepdims=True) - atol
    return TabularPolicy.from_probs(best.astype(float))


def softmax_policy(Q: np.ndarray, temperature: float) -> TabularPolicy:
    if not temperature > 0:
        raise DomainError(f"temperature must be positive, got {temperature}")
    z = (Q - Q.max(axis=1, keepdims=True)) / temperature
    e = np.exp(z)
    return TabularPolicy(e / e.sum(axis=1, keepdims=True))


DEFAULT_TEMPERATURES = (0.01, 0.5, 1.0, 2.0, 4.0, 8.0)


def snapshot_policies(mdp: MdpSpec, temperatures=DEFAULT_TEMPERATURES) -> list[TabularPolicy]:
    """softmax(Q*/t) for each temperature.  Index 0 plays the expert."""
    temps = [float(t) for t in temperatures]
    if any(not t > 0 for t in temps):
        raise DomainError("temperatures must be positive")
    if any(b < a for a, b in zip(temps, temps[1:])):
        raise DomainError("temperatures must be ascending")
    Q = value_iteration(mdp, tol=1e-10)
    return [softmax_policy(Q, t) for t in temps]


# --- sampling --------------------------------------------------------------

def _rng(seed):
    return seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)


def _draw(cum_rows: np.ndarray, u: np.ndarray) -> np.ndarray:
    """Inverse-CDF draw of one index per row of a cumulative table."""
    idx = (cum_rows < u[:, None]).sum(axis=1)
    return np.minimum(idx, cum_rows.shape[1] - 1)


def sample_trajectories(mdp: MdpSpec, policy, count: int, rng_seed=0,
                        horizon: int | None = None) -> TrajectoryBatch:
    """``count`` rollouts of length T under p1, pi, p_T.  Deterministic given seed."""
    if count < 1:
        raise DomainError("count must be >= 1")
    rng = _rng(rng_seed)
    T = mdp.horizon if horizon is None else int(horizon)
    pi_cum = np.cumsum(as_array(policy), axis=1)
    P_cum = np.cumsum(mdp.transition, axis=2)
    p1_cum = np.cumsum(mdp.initial)
    states = np.empty((count, T), dtype=np.int64)
    actions = np.empty((count, T), dtype=np.int64)
    s = np.minimum(np.searchsorted(p1_cum, rng.random(count), side="right"), mdp.n_states - 1)
    for t in range(T):
        a = _draw(pi_cum[s], rng.random(count))
        states[:, t] = s
        actions[:, t] = a
        s = _draw(P_cum[s, a], rng.random(count))
    return TrajectoryBatch(states, actions)


def sample_occupancy(mdp: MdpSpec, policy, n: int, rng_seed=0) -> np.ndarray:
    """``n`` i.i.d. (state, action) draws from the discounted occupancy.

    Each draw runs its own rollout and stops at a timestep t ~ Geometric(1-gamma)
    truncated to the horizon, which samples the finite-horizon normalized
    occupancy exactly.  Returns an ``(n, 2)`` integer array.
    """
    if n < 0:
        raise DomainError("n must be >= 0")
    rng = _rng(rng_seed)
    out = np.empty((n, 2), dtype=np.int64)
    if n == 0:
        return out
    g = mdp.gamma
    T = mdp.horizon
    # truncated geometric stopping times on {0, ..., T-1}
    u = rng.random(n)
    stop = np.floor(np.log1p(-u * (1.0 - g ** T)) / math.log(g)).astype(np.int64)
    stop = np.clip(stop, 0, T - 1)
    pi_cum = np.cumsum(as_array(policy), axis=1)
    P_cum = np.cumsum(mdp.transition, axis=2)
    p1_cum = np.cumsum(mdp.initial)
    s = np.minimum(np.searchsorted(p1_cum, rng.random(n), side="right"), mdp.n_states - 1)
    active = np.arange(n)
    t = 0
    while active.size:
        a = _draw(pi_cum[s], rng.random(active.size))
        done = stop[active] == t
        out[active[done], 0] = s[done]
        out[active[done], 1] = a[done]
        keep = ~done
        active, s, a = active[keep], s[keep], a[keep]
        if active.size:
            s = _draw(P_cum[s, a], rng.random(active.size))
        t += 1
    return out


def sample_from_density(rho, n: int, rng_seed=0) -> np.ndarray:
    """``n`` i.i.d. cells drawn directly from a density table."""
    d = as_array(rho)
    rng = _rng(rng_seed)
    flat = rng.choice(d.size, size=n, p=d.ravel() / d.sum())
    return np.stack(np.unravel_index(flat, d.shape), axis=1).astype(np.int64)


def histogram(samples: np.ndarray, shape) -> np.ndarray:
    """Empirical density of (state, action) samples."""
    S, A = shape
    counts = np.bincount(samples[:, 0] * A + samples[:, 1], minlength=S * A)
    return (counts / max(len(samples), 1)).reshape(S, A)


def total_variation(p, q) -> float:
    return 0.5 * float(np.abs(as_array(p) - as_array(q)).sum())


# --- environment families --------------------------------------------------

MOVES = ((-1, 0), (0, 1), (1, 0), (0, -1))  # up, right, down, left


GOAL_MODES = ("reset", "absorbing")


def gridworld(size: int = 5, slip: float = 0.1, gamma: float = 0.95,
              goal: int | None = None, start: int = 0, goal_mode: str = "reset",
              horizon: int | None = None) -> MdpSpec:
    """``size`` x ``size`` grid with four moves and a single rewarding goal.

    With probability ``1 - slip`` the chosen move is executed; otherwise a
    move is drawn uniformly from all four.  Moves into a wall leave the agent
    in place.  Every action taken in the goal cell earns reward 1.  With
    ``goal_mode="reset"`` the goal then sends the agent back to ``start``, so
    the return measures how often the goal is reached; ``"absorbing"`` keeps
    the agent in the goal forever.  The agent starts top-left by default and
    the goal defaults to the top-right corner, so the shortest route is
    unique and the expert has no tied actions along it.
    """
    if goal_mode not in GOAL_MODES:
        raise DomainError(f"goal_mode must be one of {GOAL_MODES}")
    if size < 2:
        raise DomainError("gridworld size must be >= 2")
    if not 0.0 <= slip <= 1.0:
        raise DomainError(f"slip must lie in [0, 1], got {slip}")
    if not 0.0 < gamma < 1.0:
        raise DomainError(f"gamma must lie in (0, 1), got {gamma}")
    S = size * size
    goal = size - 1 if goal is None else int(goal)
    if not (0 <= goal < S and 0 <= start < S):
        raise DomainError("goal/start outside the grid")

    def step(s, m):
        r, c = divmod(s, size)
        dr, dc = MOVES[m]
        r2, c2 = r + dr, c + dc
        if 0 <= r2 < size and 0 <= c2 < size:
            return r2 * size + c2
        return s

    P = np.zeros((S, 4, S))
    for s in range(S):
        for a in range(4):
            if s == goal:
                P[s, a, s if goal_mode == "absorbing" else start] = 1.0
                continue
            P[s, a, step(s, a)] += 1.0 - slip
            for m in range(4):
                P[s, a, step(s, m)] += slip / 4.0
    R = np.zeros((S, 4))
    R[goal, :] = 1.0
    p1 = np.zeros(S)
    p1[start] = 1.0
    return MdpSpec(P, p1, R, gamma, horizon_for(gamma) if horizon is None else horizon)


def random_mdp(n_states: int, n_actions: int, gamma: float = 0.9, rng_seed=0,
               horizon: int | None = None, concentration: float = 1.0) -> MdpSpec:
    """Dirichlet transitions/initial distribution and U(0, 1) rewards."""
    rng = _rng(rng_seed)
    P = rng.dirichlet(np.full(n_states, concentration), size=(n_states, n_actions))
    p1 = rng.dirichlet(np.ones(n_states))
    R = rng.random((n_states, n_actions))
    return MdpSpec(P, p1, R, gamma, horizon_for(gamma) if horizon is None else horizon)


# --- text serialization ----------------------------------------------------

def _fmt(x: float) -> str:
    return "%.17g" % x


def dumps_mdp(mdp: MdpSpec) -> str:
    S, A = mdp.shape
    out = io.StringIO()
    out.write("ril-mdp v1\n")
    out.write(f"states {S}\nactions {A}\ngamma {_fmt(mdp.gamma)}\nhorizon {mdp.horizon}\n")
    out.write("initial\n")
    out.write(" ".join(_fmt(v) for v in mdp.initial) + "\n")
    out.write("reward\n")
    for row in mdp.reward:
        out.write(" ".join(_fmt(v) for v in row) + "\n")
    out.write("transition\n")
    for s in range(S):
        for a in range(A):
            out.write(" ".join(_fmt(v) for v in mdp.transition[s, a]) + "\n")
    return out.getvalue()


def loads_mdp(text: str) -> MdpSpec:
    """Parse :func:`dumps_mdp` output; validation raises :class:`InvariantError`."""
    lines = [ln.strip() for ln in text.splitlines() if ln.strip() and not ln.startswith("#")]
    try:
        if lines[0] != "ril-mdp v1":
            raise InvariantError("mdp_header", f"bad header {lines[0]!r}")
        head = dict(ln.split() for ln in lines[1:5])
        S, A = int(head["states"]), int(head["actions"])
        gamma, T = float(head["gamma"]), int(head["horizon"])
        i = 5
        assert lines[i] == "initial"
        p1 = np.array(lines[i + 1].split(), dtype=float)
        i += 2
        assert lines[i] == "reward"
        R = np.array([ln.split() for ln in lines[i + 1:i + 1 + S]], dtype=float)
        i += 1 + S
        assert lines[i] == "transition"
        P = np.array([ln.split() for ln in lines[i + 1:i + 1 + S * A]], dtype=float)
        P = P.reshape(S, A, S)
    except InvariantError:
        raise
    except (IndexError, KeyError, ValueError, AssertionError) as exc:
        raise InvariantError("mdp_format", f"malformed MDP document: {exc}") from exc
    return MdpSpec(P, p1, R, gamma, T)


def save_mdp(mdp: MdpSpec, path) -> None:
    Path(path).write_text(dumps_mdp(mdp))


def load_mdp(path) -> MdpSpec:
    return loads_mdp(Path(path).read_text())


def dumps_policy(policy) -> str:
    p = as_array(policy)
    S, A = p.shape
    rows = "\n".join(" ".join(_fmt(v) for v in row) for row in p)
    return f"ril-policy v1\nstates {S}\nactions {A}\n{rows}\n"


def loads_policy(text: str) -> TabularPolicy:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if lines[0].strip() != "ril-policy v1":
        raise InvariantError("policy_header", f"bad header {lines[0]!r}")
    S = int(lines[1].split()[1])
    p = np.array([ln.split() for ln in lines[3:3 + S]], dtype=float)
    return TabularPolicy(p)
