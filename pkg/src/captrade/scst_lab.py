"""Self-critical policy-gradient simulator over a fixed candidate pool.

The policy is a single categorical distribution softmax(logits) over N
enumerated candidates. Each REINFORCE step draws K candidates with
replacement, scores them with the pool rewards, subtracts one of three
baselines and ascends the mean score-function gradient:

* ``greedy`` - reward of the current argmax candidate (lowest index on ties)
* ``avg``    - mean reward of the other K-1 samples
* ``rmr``    - range median (max + min) / 2 of the K sampled rewards

Advantages are formed from reward differences only, so adding the same
constant to every pool reward leaves them unchanged whenever the shifted
rewards are exactly representable (e.g. rewards on a dyadic grid).
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import rng as _rng
from .corpus import Caption, CaptionSet, ReferenceSet
from .ngram_metrics import DfStats, cider, div_n, mbleu
from .spectral import self_cider

__all__ = [
    "BASELINE_KINDS",
    "CandidatePool",
    "PolicyState",
    "SimTrajectory",
    "rmr_baseline",
    "avg_baseline",
    "greedy_baseline",
    "advantages",
    "reinforce_step",
    "run_sim",
    "random_reward_pool",
]

BASELINE_KINDS = ("greedy", "avg", "rmr")

DEFAULT_K = 5
DEFAULT_LR = 0.1
DEFAULT_STEPS = 500


@dataclass(frozen=True, eq=False)
class CandidatePool:
    rewards: np.ndarray
    captions: tuple[Caption, ...] | None = None
    df: DfStats | None = None

    def __post_init__(self):
        r = np.asarray(self.rewards, dtype=float)
        if r.ndim != 1 or r.size < 2:
            raise ValueError("a candidate pool needs at least two rewards")
        if not np.all(np.isfinite(r)):
            raise ValueError("pool rewards must be finite")
        if self.captions is not None and len(self.captions) != r.size:
            raise ValueError(f"{len(self.captions)} captions but {r.size} rewards")
        object.__setattr__(self, "rewards", r)

    @classmethod
    def from_captions(cls, captions: Sequence[str | Caption], refs: ReferenceSet,
                      df: DfStats) -> "CandidatePool":
        """Pool whose rewards are the CIDEr-D scores of ``captions`` against ``refs``."""
        caps = tuple(c if isinstance(c, Caption) else Caption.from_raw(c) for c in captions)
        rewards = [cider(c, refs, df) for c in caps]
        return cls(np.array(rewards), caps, df)

    def shifted(self, c: float) -> "CandidatePool":
        return CandidatePool(self.rewards + c, self.captions, self.df)

    @property
    def n(self) -> int:
        return self.rewards.size


def random_reward_pool(n: int = 20, seed: int = 0, high: float = 10.0,
                       grid: int = 1024) -> CandidatePool:
    """Pool of ``n`` rewards drawn uniformly from [0, high], rounded to multiples of 1/grid.

    The default range is the CIDEr-D scale. Dyadic rounding keeps
    ``pool.shifted(c)`` exact for moderate constants.
    """
    raw = _rng.make_rng(seed).uniform(0.0, high, n)
    return CandidatePool(np.round(raw * grid) / grid)


def _softmax(logits: np.ndarray) -> np.ndarray:
    e = np.exp(logits - logits.max())
    return e / e.sum()


@dataclass(frozen=True, eq=False)
class PolicyState:
    logits: np.ndarray
    step: int = 0

    @classmethod
    def uniform(cls, n: int) -> "PolicyState":
        return cls(np.zeros(n))

    @property
    def probs(self) -> np.ndarray:
        return _softmax(self.logits)

    @property
    def entropy(self) -> float:
        p = self.probs
        nz = p[p > 0]
        return max(0.0, float(-np.sum(nz * np.log(nz))))

    def expected_reward(self, pool: CandidatePool) -> float:
        return float(np.dot(self.probs, pool.rewards))


# --- baselines ---------------------------------------------------------------

def rmr_baseline(rewards: Sequence[float]) -> float:
    """Range median (max + min) / 2 of a group of sampled rewards."""
    r = np.asarray(rewards, dtype=float)
    if r.size == 0:
        raise ValueError("rmr_baseline of an empty reward group")
    return float((r.max() + r.min()) / 2.0)


def avg_baseline(rewards: Sequence[float], exclude: int) -> float:
    """Mean reward of every sample except position ``exclude``."""
    r = np.asarray(rewards, dtype=float)
    if r.size < 2:
        raise ValueError("avg_baseline needs at least two samples")
    if not 0 <= exclude < r.size:
        raise IndexError(f"exclude={exclude} out of range for {r.size} samples")
    return math.fsum(np.delete(r, exclude)) / (r.size - 1)


def greedy_baseline(policy: PolicyState, pool: CandidatePool) -> float:
    # np.argmax returns the first maximum: lowest index wins ties
    return float(pool.rewards[int(np.argmax(policy.logits))])


def _check_kind(kind: str, k: int) -> None:
    if kind not in BASELINE_KINDS:
        raise ValueError(f"unknown baseline kind {kind!r}; valid kinds: {', '.join(BASELINE_KINDS)}")
    if k < 1:
        raise ValueError(f"K must be >= 1, got {k}")
    if kind in ("avg", "rmr") and k < 2:
        raise ValueError(f"baseline {kind!r} needs K >= 2 samples, got {k}")


def advantages(sampled: Sequence[float], kind: str, greedy_reward: float | None = None) -> np.ndarray:
    """Per-sample advantages r_n - b for one sampled group."""
    r = np.asarray(sampled, dtype=float)
    _check_kind(kind, r.size)
    if kind == "greedy":
        if greedy_reward is None:
            raise ValueError("greedy advantages need the greedy candidate's reward")
        return r - greedy_reward
    if kind == "rmr":
        return r - (r.max() + r.min()) / 2.0
    # r_n - mean_{j!=n} r_j written as a mean of differences
    k = r.size
    diff = r[:, None] - r[None, :]
    return np.array([math.fsum(diff[n]) for n in range(k)]) / (k - 1)


def reinforce_step(policy: PolicyState, pool: CandidatePool, k: int = DEFAULT_K,
                   baseline_kind: str = "rmr", lr: float = DEFAULT_LR, seed: int = 0,
                   ) -> PolicyState:
    """One REINFORCE update; the draw is fixed by ``(seed, policy.step)``."""
    return _step(policy, pool, k, baseline_kind, lr, seed)[0]


def _step(policy, pool, k, kind, lr, seed):
    _check_kind(kind, k)
    probs = policy.probs
    gen = _rng.make_rng(seed, _rng.SCST_STEP, policy.step)
    idx = gen.choice(pool.n, size=k, p=probs)
    sampled = pool.rewards[idx]
    greedy = greedy_baseline(policy, pool) if kind == "greedy" else None
    adv = advantages(sampled, kind, greedy)
    # sum_n A_n (onehot(i_n) - pi), averaged over the K samples
    grad = -adv.sum() * probs
    np.add.at(grad, idx, adv)
    grad /= k
    return PolicyState(policy.logits + lr * grad, policy.step + 1), sampled, adv


# --- simulation ----------------------------------------------------------------

SNAPSHOT_COLUMNS = ("div_1", "div_2", "mbleu_4", "self_cider")
CSV_COLUMNS = ("step", "expected_reward", "entropy", "effective_support") + SNAPSHOT_COLUMNS


@dataclass
class SimTrajectory:
    baseline_kind: str
    steps: list[int] = field(default_factory=list)
    expected_reward: list[float] = field(default_factory=list)
    entropy: list[float] = field(default_factory=list)
    effective_support: list[float] = field(default_factory=list)
    snapshots: dict[int, dict[str, float | None]] = field(default_factory=dict)
    final_logits: np.ndarray | None = None
    first_baselines: np.ndarray | None = None

    def record(self, policy: PolicyState, pool: CandidatePool) -> None:
        h = policy.entropy
        self.steps.append(policy.step)
        self.expected_reward.append(policy.expected_reward(pool))
        self.entropy.append(h)
        self.effective_support.append(math.exp(h))

    @property
    def final_entropy(self) -> float:
        return self.entropy[-1]

    @property
    def final_expected_reward(self) -> float:
        return self.expected_reward[-1]

    def to_csv(self, fh=None) -> str:
        """Write the trajectory as CSV (to ``fh`` if given) and return the text."""
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for i, step in enumerate(self.steps):
            snap = self.snapshots.get(step, {})
            row = [step, repr(self.expected_reward[i]), repr(self.entropy[i]),
                   repr(self.effective_support[i])]
            row += ["" if snap.get(c) is None else repr(snap[c]) for c in SNAPSHOT_COLUMNS]
            w.writerow(row)
        text = buf.getvalue()
        if fh is not None:
            fh.write(text)
        return text


def _snapshot(policy: PolicyState, pool: CandidatePool, k: int, seed: int) -> dict:
    gen = _rng.make_rng(seed, _rng.SCST_SNAPSHOT, policy.step)
    idx = gen.choice(pool.n, size=k, p=policy.probs)
    cs = CaptionSet("snapshot", tuple(pool.captions[i] for i in idx))
    words = sum(len(c) for c in cs.captions)
    snap: dict[str, float | None] = dict.fromkeys(SNAPSHOT_COLUMNS)
    if words:
        snap["div_1"] = div_n(cs, 1)
        snap["div_2"] = div_n(cs, 2)
    if k >= 2:
        snap["mbleu_4"] = mbleu(cs, 4)
        if pool.df is not None:
            try:
                snap["self_cider"] = self_cider(cs, pool.df)
            except ValueError:
                snap["self_cider"] = None
    return snap


def run_sim(pool: CandidatePool, baseline_kind: str = "rmr", k: int = DEFAULT_K,
            lr: float = DEFAULT_LR, steps: int = DEFAULT_STEPS, seed: int = 0,
            snapshot_every: int = 0, init: PolicyState | None = None) -> SimTrajectory:
    """Run ``steps`` REINFORCE updates from a uniform policy and record the trajectory.

    Row 0 is the initial policy. When the pool carries captions and
    ``snapshot_every > 0``, every ``snapshot_every``-th step (and step 0)
    also samples K captions from the current policy and scores their
    diversity.
    """
    _check_kind(baseline_kind, k)
    if steps < 0:
        raise ValueError(f"steps must be >= 0, got {steps}")
    policy = init if init is not None else PolicyState.uniform(pool.n)
    traj = SimTrajectory(baseline_kind)
    snap = snapshot_every > 0 and pool.captions is not None

    traj.record(policy, pool)
    if snap:
        traj.snapshots[policy.step] = _snapshot(policy, pool, k, seed)
    for t in range(steps):
        policy, sampled, adv = _step(policy, pool, k, baseline_kind, lr, seed)
        if t == 0:
            traj.first_baselines = sampled - adv
        traj.record(policy, pool)
        if snap and policy.step % snapshot_every == 0:
            traj.snapshots[policy.step] = _snapshot(policy, pool, k, seed)
    traj.final_logits = policy.logits
    return traj
