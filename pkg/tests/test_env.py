import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from uavcollect.config import desk_profile
from uavcollect.env import DataCollectionEnv, EpisodeDone, FactoredAction, compute_reward
from uavcollect.harness import RandomFlightPolicy, circling_policy, indices_to_action

FAR = "0,0; 1000,0; 0,1000; 1000,1000; 0,500"


def _cfg(**kw):
    base = dict(run__algo="fbs")
    base.update(kw)
    return desk_profile(**base)


def _play(env, policy, seed):
    obs = env.reset(seed)
    out = []
    done = False
    while not done:
        idx = policy(obs, env.action_mask())
        obs, r, done, info = env.step(indices_to_action(idx, env.k, env.uses_beam_actions))
        out.append((obs, r, done, info))
    return out


# -- reward -----------------------------------------------------------------------

def test_reward_zero_history_oob():
    rb = compute_reward([], [], True, 10.0, 50.0)
    assert rb.total == -50.0 and rb.penalty == 50.0


def test_reward_cumulative_volume():
    v = np.array([3.0, 1.0])
    rb = compute_reward([v, v], [np.zeros(2), np.zeros(2)], False, 1.0, 5.0, "cumulative", 0.5)
    assert rb.volume_term == pytest.approx(2 * 4.0 * 0.5)
    inc = compute_reward([v, v], [np.zeros(2), np.zeros(2)], False, 1.0, 5.0, "incremental", 0.5)
    assert inc.volume_term == pytest.approx(4.0 * 0.5)


def test_reward_rejects_unknown_mode():
    with pytest.raises(ValueError):
        compute_reward([np.ones(2)], [np.ones(2)], False, 1.0, 1.0, "bogus")


@settings(max_examples=200, deadline=None)
@given(st.integers(1, 6), st.integers(1, 20), st.integers(0, 10_000))
def test_bonus_capped_and_monotone(k, n, seed):
    rng = np.random.default_rng(seed)
    cov = [rng.integers(0, 2, k) for _ in range(n)]
    vol = [np.zeros(k)] * n
    prev = 0.0
    for i in range(1, n + 1):
        rb = compute_reward(vol[:i], cov[:i], False, 2.5, 1.0)
        assert prev <= rb.coverage_bonus <= 2.5 * k
        prev = rb.coverage_bonus


# -- reset / observation ------------------------------------------------------------

def test_reset_same_seed_identical():
    env = DataCollectionEnv(_cfg())
    assert np.array_equal(env.reset(3), env.reset(3))


def test_reset_random_layouts_differ():
    env = DataCollectionEnv(_cfg(scenario__layout_seed=-1))
    a, b = env.reset(1), env.reset(2)
    assert not np.array_equal(a[4:14], b[4:14])


def test_start_at_centre_normalised():
    env = DataCollectionEnv(_cfg())
    obs = env.reset(0)
    assert np.allclose(obs[:2], [0.5, 0.5])
    assert len(obs) == env.obs_dim and np.all(np.isfinite(obs))


def test_raw_observation_length():
    env = DataCollectionEnv(_cfg(env__obs_mode="raw"))
    obs = env.reset(0)
    assert len(obs) == env.obs_dim == 4 + 5 * (2 + 16 + 1) + 1


def test_branch_sizes_by_mode():
    assert DataCollectionEnv(_cfg(run__algo="rla")).branch_sizes() == [3, 8, 3, 3, 3, 3, 3]
    assert DataCollectionEnv(_cfg(run__algo="alo")).branch_sizes() == [3, 8] + [3] * 5 + [16] * 5


# -- step ---------------------------------------------------------------------------

def test_no_coverage_gives_zero_rewards():
    env = DataCollectionEnv(_cfg(scenario__node_positions=FAR))
    steps = _play(env, circling_policy(env, 0, 1), 0)
    assert len(steps) == 30
    assert all(r == 0.0 for _, r, _, _ in steps)


def test_first_coverage_bonus_counts_nodes():
    pos = "500,500; 505,500; 0,0; 1000,0; 0,1000"
    env = DataCollectionEnv(_cfg(scenario__node_positions=pos, env__omega=1.0))
    env.reset(0)
    _, _, _, info = env.step(FactoredAction(0, 0, (2,) * 5))
    assert info.reward.coverage_bonus == 2.0
    assert info.record["scheduled"] == [0, 1]


def test_done_only_at_last_slot_then_error():
    env = DataCollectionEnv(_cfg())
    steps = _play(env, RandomFlightPolicy(env, 4), 4)
    assert [d for _, _, d, _ in steps] == [False] * 29 + [True]
    with pytest.raises(EpisodeDone):
        env.step(FactoredAction(0, 0, (0,) * 5))


def test_step_before_reset_rejected():
    env = DataCollectionEnv(_cfg())
    with pytest.raises(EpisodeDone):
        env.step(FactoredAction(0, 0, (0,) * 5))


def test_invalid_action_rejected():
    env = DataCollectionEnv(_cfg(run__algo="alo"))
    env.reset(0)
    with pytest.raises(ValueError):
        env.step(FactoredAction(3, 0, (0,) * 5, (0,) * 5))
    with pytest.raises(ValueError):
        env.step(FactoredAction(0, 0, (0,) * 5))


@pytest.mark.parametrize("algo", ["fbs", "alo", "rla"])
def test_reward_replay_oracle(algo):
    cfg = _cfg(run__algo=algo, scenario__node_positions="480,520; 530,470; 600,600; 300,500; 900,900")
    env = DataCollectionEnv(cfg)
    steps = _play(env, RandomFlightPolicy(env, 9), 9)
    vols, covs = [], []
    for _, r, _, info in steps:
        rec = info.record
        vols.append(np.array(rec["volume"]))
        cov = np.zeros(env.k)
        cov[rec["scheduled"]] = 1
        covs.append(cov)
        rb = compute_reward(vols, covs, rec["out_of_bounds"], cfg.env.omega, cfg.env.p_out,
                            cfg.env.reward_mode, cfg.volume_scale())
        assert r == pytest.approx(rb.total, rel=1e-12, abs=1e-12)
        parts = rec["reward"]
        assert parts["volume"] + parts["bonus"] - parts["penalty"] == pytest.approx(r)
    assert sum(np.sum(v) for v in vols) > 0


def test_unscheduled_nodes_collect_nothing():
    env = DataCollectionEnv(_cfg())
    for _, _, _, info in _play(env, RandomFlightPolicy(env, 2), 2):
        off = np.setdiff1d(np.arange(env.k), info.record["scheduled"])
        assert np.all(np.asarray(info.record["volume"])[off] == 0)


def test_zero_power_node_transmits_nothing():
    pos = "500,500; 505,500; 0,0; 1000,0; 0,1000"
    env = DataCollectionEnv(_cfg(scenario__node_positions=pos), beam_mode="mmse")
    env.reset(0)
    _, _, _, info = env.step(FactoredAction(0, 0, (0, 2, 2, 2, 2)))
    assert info.record["volume"][0] == 0 and info.record["volume"][1] > 0


def test_transition_streams_deterministic():
    cfg = _cfg(run__algo="rla")
    runs = []
    for _ in range(2):
        env = DataCollectionEnv(cfg)
        runs.append(_play(env, RandomFlightPolicy(env, 5), 5))
    for (o1, r1, d1, i1), (o2, r2, d2, i2) in zip(*runs):
        assert np.array_equal(o1, o2) and r1 == r2 and d1 == d2 and i1.record == i2.record


def test_masked_policy_respects_kinematics():
    from uavcollect.scenario import kinematic_violations
    env = DataCollectionEnv(_cfg())
    steps = _play(env, RandomFlightPolicy(env, 1), 1)
    assert kinematic_violations([s[3].record["velocity"] for s in steps], env.limits) == 0
