"""Noisy demonstration datasets.

A dataset mixes ``n_expert`` draws from the expert's occupancy with ``m``
draws from the non-expert snapshots (each draw picks a snapshot uniformly),
so its generating density is ``alpha * rho_E + (1 - alpha) * mean_k rho_k``.

Which policy produced each sample is kept in a separate :class:`Provenance`
object.  Training code only ever receives the :class:`DemoDataset`.
"""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DomainError, InvariantError
from .mdp import MdpSpec, occupancy_exact, sample_occupancy

# non-expert samples per expert sample, following the dataset counts used for
# the published noise-rate sweep (7500 non-expert per 10000 expert at 0.4)
NONEXPERT_RATIO = {0.0: 0.0, 0.1: 0.1, 0.2: 0.25, 0.3: 0.5, 0.4: 0.75}

EXPERT = 0


def nonexpert_count(n_expert: int, delta: float) -> int:
    """Number of non-expert samples paired with ``n_expert`` expert ones.

    Tabulated noise rates use the table above; any other rate solves
    ``m / (n + m) = delta`` exactly.
    """
    if not 0.0 <= delta < 0.5:
        raise DomainError(f"noise rate must lie in [0, 0.5), got {delta}")
    for d, ratio in NONEXPERT_RATIO.items():
        if abs(delta - d) < 1e-12:
            return int(round(ratio * n_expert))
    return int(round(delta / (1.0 - delta) * n_expert))


@dataclass(frozen=True, eq=False)
class DemoDataset:
    samples: np.ndarray  # (N, 2) int: state, action
    declared_noise_rate: float = 0.0
    seed: int | None = None

    def __post_init__(self):
        s = np.array(self.samples, dtype=np.int64).reshape(-1, 2)
        s.setflags(write=False)
        object.__setattr__(self, "samples", s)

    def __len__(self):
        return len(self.samples)

    def subset(self, index) -> "DemoDataset":
        return DemoDataset(self.samples[index], self.declared_noise_rate, self.seed)


@dataclass(frozen=True, eq=False)
class Provenance:
    """Evaluation-only tags: 0 = expert, k >= 1 = non-expert snapshot k."""

    tags: np.ndarray

    def __post_init__(self):
        t = np.array(self.tags, dtype=np.int64)
        t.setflags(write=False)
        object.__setattr__(self, "tags", t)

    @property
    def true_alpha(self) -> float:
        return float(np.mean(self.tags == EXPERT)) if len(self.tags) else float("nan")

    def is_nonexpert(self, index) -> np.ndarray:
        return self.tags[np.asarray(index, dtype=np.int64)] != EXPERT

    def subset(self, index) -> "Provenance":
        return Provenance(self.tags[index])


@dataclass(frozen=True, eq=False)
class SplitDataset:
    d1: DemoDataset
    d2: DemoDataset
    index1: np.ndarray
    index2: np.ndarray


def mixture_density(mdp: MdpSpec, snapshots, alpha: float) -> np.ndarray:
    """Exact generating density alpha * rho_E + (1 - alpha) * mean non-expert occupancy."""
    rho_e = occupancy_exact(mdp, snapshots[0]).density
    rho_n = np.mean([occupancy_exact(mdp, p).density for p in snapshots[1:]], axis=0)
    return alpha * rho_e + (1.0 - alpha) * rho_n


def generate_noisy_dataset(mdp: MdpSpec, snapshots, n_expert: int, delta: float,
                           rng_seed: int = 0) -> tuple[DemoDataset, Provenance]:
    """Draw a shuffled noisy dataset.  Returns the dataset and its provenance."""
    if n_expert < 1:
        raise DomainError("n_expert must be >= 1")
    if len(snapshots) < 2:
        raise DomainError("need an expert and at least one non-expert snapshot")
    m = nonexpert_count(n_expert, delta)
    if m >= n_expert:
        raise DomainError("expert samples must be the majority (alpha > 0.5)")
    ss = np.random.SeedSequence(rng_seed)
    seeds = ss.spawn(len(snapshots) + 2)
    rng = np.random.default_rng(seeds[0])

    parts = [sample_occupancy(mdp, snapshots[0], n_expert, np.random.default_rng(seeds[1]))]
    tags = [np.zeros(n_expert, dtype=np.int64)]
    n_nonexpert = len(snapshots) - 1
    which = rng.integers(0, n_nonexpert, size=m)
    counts = np.bincount(which, minlength=n_nonexpert)
    for k in range(n_nonexpert):
        parts.append(sample_occupancy(mdp, snapshots[k + 1], int(counts[k]),
                                      np.random.default_rng(seeds[k + 2])))
        tags.append(np.full(counts[k], k + 1, dtype=np.int64))
    samples = np.concatenate(parts)
    tags = np.concatenate(tags)
    order = rng.permutation(len(samples))
    return (DemoDataset(samples[order], float(delta), rng_seed),
            Provenance(tags[order]))


def split_dataset(d: DemoDataset, rng_seed=0) -> SplitDataset:
    """Random disjoint halves; the first gets floor(N/2) samples."""
    n = len(d)
    if n < 2:
        raise DomainError("need at least two samples to split")
    perm = np.random.default_rng(rng_seed).permutation(n)
    i1, i2 = np.sort(perm[: n // 2]), np.sort(perm[n // 2:])
    return SplitDataset(d.subset(i1), d.subset(i2), i1, i2)


def minibatch_indices(n: int, size: int, seed, counter: int = 0) -> np.ndarray:
    if n < 1:
        raise DomainError("cannot sample from an empty dataset")
    if size < 1:
        raise DomainError("minibatch size must be >= 1")
    rng = np.random.default_rng([int(seed), int(counter)]) if not isinstance(
        seed, np.random.Generator) else seed
    return rng.integers(0, n, size=size)


def sample_minibatch(d: DemoDataset, size: int, seed=0, counter: int = 0) -> np.ndarray:
    """Uniform draws with replacement; deterministic given (seed, counter)."""
    return d.samples[minibatch_indices(len(d), size, seed, counter)]


# --- file format -------------------------------------------------------------

def dumps_dataset(d: DemoDataset) -> str:
    head = f"ril-demo v1 n={len(d)} delta={d.declared_noise_rate!r} seed={d.seed}"
    body = "\n".join(f"{s},{a}" for s, a in d.samples.tolist())
    return head + "\n" + body + ("\n" if body else "")


def loads_dataset(text: str) -> DemoDataset:
    lines = text.splitlines()
    head = lines[0].split()
    if head[:2] != ["ril-demo", "v1"]:
        raise InvariantError("demo_header", f"bad header {lines[0]!r}")
    fields = dict(kv.split("=", 1) for kv in head[2:])
    n = int(fields["n"])
    rows = [ln.split(",") for ln in lines[1:] if ln.strip()]
    if len(rows) != n:
        raise InvariantError("demo_count", f"header says n={n}, found {len(rows)} rows")
    seed = None if fields.get("seed", "None") == "None" else int(fields["seed"])
    return DemoDataset(np.array(rows, dtype=np.int64).reshape(-1, 2),
                       float(fields["delta"]), seed)


def dumps_provenance(p: Provenance) -> str:
    return "".join("expert\n" if t == EXPERT else f"nonexpert:{t}\n" for t in p.tags.tolist())


def loads_provenance(text: str) -> Provenance:
    tags = [0 if ln == "expert" else int(ln.split(":")[1])
            for ln in text.splitlines() if ln.strip()]
    return Provenance(np.array(tags, dtype=np.int64))


def provenance_path(dataset_path) -> Path:
    p = Path(dataset_path)
    return p.with_name(p.name + ".provenance")


def save_dataset(d: DemoDataset, path, provenance: Provenance | None = None) -> None:
    Path(path).write_text(dumps_dataset(d))
    if provenance is not None:
        provenance_path(path).write_text(dumps_provenance(provenance))


def load_dataset(path) -> DemoDataset:
    return loads_dataset(Path(path).read_text())


def load_provenance(dataset_path) -> Provenance | None:
    p = provenance_path(dataset_path)
    return loads_provenance(p.read_text()) if p.exists() else None
