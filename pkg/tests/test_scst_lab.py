import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from captrade.corpus import ReferenceSet
from captrade.ngram_metrics import compute_df
from captrade.scst_lab import (CandidatePool, PolicyState, advantages, avg_baseline,
                               greedy_baseline, random_reward_pool, reinforce_step, rmr_baseline,
                               run_sim)

S1 = [1.0, 2.0, 3.0, 4.0, 9.0]
S2 = [1.0, 6.0, 7.0, 8.0, 9.0]


# --- baselines ----------------------------------------------------------------------

def test_rmr_worked_groups():
    assert rmr_baseline(S1) == 5.0
    assert 4.0 - rmr_baseline(S1) == -1.0
    assert rmr_baseline(S2) == 5.0
    assert 9.0 - rmr_baseline(S2) == 4.0


def test_avg_worked_groups():
    assert avg_baseline(S1, exclude=3) == 3.75
    assert 4.0 - avg_baseline(S1, exclude=3) == 0.25
    assert avg_baseline(S2, exclude=4) == 5.5
    assert 9.0 - avg_baseline(S2, exclude=4) == 3.5


def test_sample_six_in_s2():
    # range median encourages the 6, the leave-one-out mean punishes it
    assert 6.0 - rmr_baseline(S2) > 0
    assert 6.0 - avg_baseline(S2, exclude=1) < 0


def test_degenerate_groups():
    assert rmr_baseline([2.5] * 4) == 2.5
    np.testing.assert_array_equal(advantages([2.5] * 4, "rmr"), 0.0)
    np.testing.assert_array_equal(advantages([2.5] * 4, "avg"), 0.0)
    assert avg_baseline([3.0, 8.0], exclude=0) == 8.0


def test_baseline_errors():
    with pytest.raises(ValueError):
        rmr_baseline([])
    with pytest.raises(ValueError):
        avg_baseline([1.0], 0)
    with pytest.raises(ValueError):
        advantages([1.0, 2.0], "median")


def test_advantages_match_baselines():
    adv = advantages(S1, "avg")
    for n, r in enumerate(S1):
        assert adv[n] == pytest.approx(r - avg_baseline(S1, n), abs=1e-15)
    np.testing.assert_array_equal(advantages(S1, "rmr"), np.array(S1) - 5.0)
    np.testing.assert_array_equal(advantages(S1, "greedy", 2.0), np.array(S1) - 2.0)


rewards = st.lists(st.integers(-1000, 1000).map(lambda v: v / 64), min_size=2, max_size=8)


@given(rewards, st.randoms())
def test_permutation_invariance(r, rnd):
    perm = r[:]
    rnd.shuffle(perm)
    assert rmr_baseline(r) == rmr_baseline(perm)
    assert sorted(avg_baseline(r, i) for i in range(len(r))) == \
        sorted(avg_baseline(perm, i) for i in range(len(perm)))


@given(rewards)
def test_rmr_in_range_and_symmetric(r):
    b = rmr_baseline(r)
    assert min(r) <= b <= max(r)
    sym = r + [2 * b - v for v in r]
    assert np.mean(sym) == pytest.approx(rmr_baseline(sym), abs=1e-9)


@given(rewards, st.integers(-50, 50))
def test_shift_moves_baselines(r, c):
    shifted = [v + c for v in r]
    assert rmr_baseline(shifted) == rmr_baseline(r) + c
    for i in range(len(r)):
        assert avg_baseline(shifted, i) == pytest.approx(avg_baseline(r, i) + c, abs=1e-9)
    for kind in ("rmr", "avg"):
        np.testing.assert_array_equal(advantages(shifted, kind), advantages(r, kind))


def test_greedy_baseline_tie_and_dominant():
    pool = CandidatePool(np.array(S1))
    assert greedy_baseline(PolicyState.uniform(5), pool) == 1.0
    assert greedy_baseline(PolicyState(np.array([0, 0, 5.0, 0, 0])), pool) == 3.0


# --- REINFORCE step ------------------------------------------------------------------

def test_zero_advantage_leaves_logits():
    pool = CandidatePool(np.full(4, 2.0))
    pol = PolicyState(np.array([0.1, -0.3, 0.0, 0.7]))
    for kind in ("greedy", "avg", "rmr"):
        new = reinforce_step(pol, pool, 3, kind, 0.5, seed=1)
        np.testing.assert_array_equal(new.logits, pol.logits)
        assert new.step == 1


def test_single_positive_sample_direction():
    # K=1 with greedy baseline: candidate 0 is greedy (reward 0); any other draw has advantage > 0
    pool = CandidatePool(np.array([0.0, 1.0, 2.0, 3.0]))
    pol = PolicyState(np.array([0.01, 0.0, 0.0, 0.0]))
    for seed in range(20):
        new = reinforce_step(pol, pool, 1, "greedy", 0.1, seed)
        moved = np.flatnonzero(new.logits > pol.logits)
        if moved.size == 0:
            continue  # drew the greedy candidate itself
        assert moved.size == 1 and moved[0] != 0
        others = np.setdiff1d(np.arange(4), moved)
        assert np.all(new.logits[others] < pol.logits[others])
        return
    pytest.fail("never drew a non-greedy candidate")


def test_step_deterministic():
    pool = CandidatePool(np.array(S1))
    runs = []
    for _ in range(2):
        pol = PolicyState.uniform(5)
        for _ in range(2):
            pol = reinforce_step(pol, pool, 5, "rmr", 0.1, seed=123)
        runs.append(pol.logits.tobytes())
    assert runs[0] == runs[1]


def test_step_validation():
    pool = CandidatePool(np.array(S1))
    with pytest.raises(ValueError, match="valid kinds"):
        reinforce_step(PolicyState.uniform(5), pool, 5, "mean", 0.1, 0)
    with pytest.raises(ValueError):
        reinforce_step(PolicyState.uniform(5), pool, 1, "avg", 0.1, 0)


def test_pool_validation():
    with pytest.raises(ValueError):
        CandidatePool(np.array([1.0]))
    with pytest.raises(ValueError):
        CandidatePool(np.array([1.0, np.inf]))


# --- simulation ------------------------------------------------------------------------

def test_zero_steps():
    tr = run_sim(CandidatePool(np.array(S1)), "rmr", steps=0)
    assert tr.steps == [0]
    assert tr.entropy[0] == pytest.approx(np.log(5))
    assert tr.expected_reward[0] == pytest.approx(np.mean(S1))


def test_greedy_collapses_to_best():
    tr = run_sim(CandidatePool(np.array(S1)), "greedy", k=5, lr=0.1, steps=2000, seed=0)
    assert tr.final_entropy < 1e-2
    assert tr.final_expected_reward > 8.95
    # the greedy candidate's reward reaches the maximum
    assert greedy_baseline(PolicyState(tr.final_logits), CandidatePool(np.array(S1))) == 9.0


def test_trajectory_invariants():
    pool = random_reward_pool(12, seed=3)
    tr = run_sim(pool, "avg", steps=200, seed=4)
    r = pool.rewards
    assert all(0.0 <= h <= np.log(12) + 1e-12 for h in tr.entropy)
    assert all(r.min() - 1e-12 <= e <= r.max() + 1e-12 for e in tr.expected_reward)
    np.testing.assert_allclose(tr.effective_support, np.exp(tr.entropy))


@pytest.mark.parametrize("kind", ["greedy", "avg", "rmr"])
def test_expected_reward_improves_every_seed(kind):
    pool = random_reward_pool(20, seed=0)
    initial = pool.rewards.mean()
    for seed in range(20):
        tr = run_sim(pool, kind, 5, 0.01, 300, seed)
        assert tr.final_expected_reward > initial


@pytest.mark.parametrize("kind", ["greedy", "avg", "rmr"])
def test_shift_gives_identical_policy_path(kind):
    pool = random_reward_pool(8, seed=5)
    a = run_sim(pool, kind, 5, 0.1, 100, seed=2)
    b = run_sim(pool.shifted(100.0), kind, 5, 0.1, 100, seed=2)
    assert a.entropy == b.entropy
    assert a.final_logits.tobytes() == b.final_logits.tobytes()
    np.testing.assert_allclose(np.array(b.expected_reward) - 100.0, a.expected_reward, atol=1e-12)


def test_entropy_relabel_invariant():
    logits = np.array([0.3, -1.0, 2.0, 0.0])
    perm = np.array([2, 0, 3, 1])
    assert PolicyState(logits).entropy == pytest.approx(PolicyState(logits[perm]).entropy, abs=1e-15)


def test_csv_columns_and_snapshots():
    caps = ["a man riding a horse", "a man on a horse", "a dog in the grass", "a red bus"]
    refsets = [ReferenceSet.of("0", ["a man riding a horse on the beach"]),
               ReferenceSet.of("1", ["two dogs play in the grass"])]
    pool = CandidatePool.from_captions(caps, refsets[0], compute_df(refsets))
    assert pool.rewards[0] > pool.rewards[2]
    tr = run_sim(pool, "rmr", k=3, steps=10, seed=1, snapshot_every=5)
    lines = tr.to_csv().splitlines()
    assert lines[0] == "step,expected_reward,entropy,effective_support,div_1,div_2,mbleu_4,self_cider"
    assert len(lines) == 12
    assert sorted(tr.snapshots) == [0, 5, 10]
    assert lines[2].endswith(",,,,")
    snap = tr.snapshots[5]
    assert 0 < snap["div_1"] <= 1 and 0 <= snap["mbleu_4"] <= 100
