"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

The learning criteria (6, 7, 9) share one set of desk-scale training runs:
every algorithm is trained for 300 episodes on seeds 0, 1 and 2 and each
checkpoint is evaluated on 5 held-out seeds. That takes roughly 20 minutes
on one core. Run standalone with ``python tests/test_acceptance.py``.
"""

import functools
import os
import sys
import time

import numpy as np
import pytest

from uavcollect import beamforming as bf
from uavcollect import config as C
from uavcollect import harness
from uavcollect.agent import (PrioritizedReplay, QNetwork, double_target, soft_update,
                              td_update)
from uavcollect.link import jain_index
from uavcollect.scenario import (KinematicLimits, Region, UavState, advance_uav,
                                 feasible_action_mask, kinematic_violations)

from conftest import oracle_instances, random_instance

CRITERIA = {
    1: "inner-loop oracle equivalence",
    2: "Taylor lower bound",
    3: "SCA monotonicity and rank-one recovery",
    4: "kinematic soundness",
    5: "agent unit math",
    6: "learning progress",
    7: "algorithm ordering",
    8: "energy-efficiency trend",
    9: "Jain bounds",
    10: "determinism",
}
RESULTS = {}

TRAIN_SEEDS = (0, 1, 2)
EVAL_EPISODES = 5


def criterion(n):
    """Record the outcome of criterion ``n`` (including crashes) and print its line."""

    def wrap(fn):
        @functools.wraps(fn)
        def run(*args, **kwargs):
            try:
                ok, detail = fn(*args, **kwargs)
            except Exception as exc:  # noqa: BLE001 - a crash is a failed criterion
                ok, detail = False, f"{type(exc).__name__}: {exc}"
            RESULTS[n] = (ok, detail)
            print(format_line(n))
            assert ok, detail

        return run

    return wrap


def format_line(n):
    if n not in RESULTS:
        return f"criterion {n:2d} ({CRITERIA[n]}): NOT RUN"
    ok, detail = RESULTS[n]
    return f"criterion {n:2d} ({CRITERIA[n]}): {'PASS' if ok else 'FAIL'} | {detail}"


# -- shared work --------------------------------------------------------------------

@pytest.fixture(scope="module")
def oracle_runs():
    insts = oracle_instances(200, seed=0)
    t0 = time.perf_counter()
    outs = [bf.sca_optimize(inst) for inst in insts]
    return insts, outs, time.perf_counter() - t0


@pytest.fixture(scope="module")
def runs(tmp_path_factory):
    """Lazily trained and evaluated desk-scale runs keyed by ``(algo, seed)``."""
    root = tmp_path_factory.mktemp("acceptance")
    cache = {}

    def get(algo, seed):
        if (algo, seed) not in cache:
            cfg = C.desk_profile(run__algo=algo)
            t0 = time.perf_counter()
            art = harness.train(cfg, seed, str(root / f"{algo}-{seed}"))
            wall = time.perf_counter() - t0
            ev = harness.evaluate(art.checkpoint, EVAL_EPISODES)
            cache[algo, seed] = {"art": art, "wall": wall, "eval": ev}
        return cache[algo, seed]

    return get


# -- criteria -----------------------------------------------------------------------

@criterion(1)
def test_c01_oracle_equivalence(oracle_runs):
    insts, outs, elapsed = oracle_runs
    gap = max(float(np.max(np.abs(o.rates - bf.mmse_beamformers(i).rates)))
              for i, o in zip(insts, outs))
    ok = gap < 1e-3 and elapsed < 120
    return ok, f"200 instances, worst rate gap {gap:.2e} bits/s/Hz, {elapsed:.1f} s"


def _rand_psd(rng, m, rank=None):
    rank = m if rank is None else rank
    x = rng.standard_normal((m, rank)) + 1j * rng.standard_normal((m, rank))
    w = x @ x.conj().T
    return w * rng.uniform(0.05, 1.0) / np.trace(w).real


@criterion(2)
def test_c02_taylor_bound():
    rng = np.random.default_rng(2)
    above = -np.inf
    at_point = 0.0
    for _ in range(1000):
        m, s = int(rng.integers(1, 9)), int(rng.integers(1, 4))
        inst = random_instance(rng, m, s)
        w = [_rand_psd(rng, m, int(rng.integers(1, m + 1))) for _ in range(s)]
        wl = [_rand_psd(rng, m) for _ in range(s)]
        above = max(above, float(np.max(bf.taylor_lower_bound(w, wl, inst) - bf.relaxed_rates(w, inst))))
        at_point = max(at_point, float(np.max(np.abs(bf.taylor_lower_bound(wl, wl, inst)
                                                     - bf.relaxed_rates(wl, inst)))))
    ok = above <= 1e-9 and at_point < 1e-9
    return ok, f"1000 pairs, max(bound - rate) {above:.2e}, max gap at expansion point {at_point:.2e}"


@criterion(3)
def test_c03_monotone_and_recovery(oracle_runs):
    _, outs, _ = oracle_runs
    drop = max(float(-np.min(np.diff(o.diagnostics["objective_history"]), initial=0.0)) for o in outs)
    rng = np.random.default_rng(3)
    worst = 0.0
    for _ in range(1000):
        m = int(rng.integers(2, 9))
        inst = random_instance(rng, m, int(rng.integers(1, 4)))
        k = int(rng.integers(inst.n_nodes))
        wstar = _rand_psd(rng, m, int(rng.integers(1, m)))
        wl = _rand_psd(rng, m)
        a, b = inst.covariances(k)
        w = bf.rank_one_recover(wstar, inst.channels[:, k], (a, b))
        worst = max(worst, abs(bf._bound_one(np.outer(w, w.conj()), wl, a, b)
                               - bf._bound_one(wstar, wl, a, b)))
    ok = drop <= 1e-9 and worst < 1e-6
    return ok, (f"largest objective drop {drop:.2e} over 200 runs; recovery bound change "
                f"{worst:.2e} on 1000 rank-deficient matrices")


@criterion(4)
def test_c04_kinematics():
    limits = KinematicLimits(5.0, 17.0, 10.0, 1.0, 30)
    region = Region(1000.0, 1000.0)
    d_levels = np.linspace(5.0, 17.0, 3)
    h_levels = 2 * np.pi * np.arange(8) / 8
    rng = np.random.default_rng(4)
    steps = violations = 0
    while steps < 100_000:
        s = UavState(rng.uniform(0, 1000, 2))
        vels = []
        for _ in range(limits.n_slots):
            mask = feasible_action_mask(s, d_levels, h_levels, limits)
            d, h = np.unravel_index(rng.choice(np.flatnonzero(mask)), mask.shape)
            s, _ = advance_uav(s, d_levels[d], h_levels[h], limits, region)
            vels.append(s.velocity)
            violations += int(not region.contains(s.position))
        violations += kinematic_violations(vels, limits)
        steps += limits.n_slots
    return violations == 0, f"{steps} masked steps, {violations} violations"


@criterion(5)
def test_c05_agent_math():
    checks = {}
    checks["double target"] = double_target(1.0, 0.9, [1.0, 2.0], [5.0, 3.0], False) == pytest.approx(3.7)
    rng = np.random.default_rng(5)
    net = QNetwork(3, [3, 4], (8, 8), True, False, 0.5, rng)
    x = rng.standard_normal((4, 3))
    before = net.q_values(x)
    net.params["adv.b"][3:] += 7.5
    checks["dueling shift"] = all(np.allclose(a, b, atol=1e-9) for a, b in zip(before, net.q_values(x)))
    t = {"x": np.zeros(1)}
    soft_update({"x": np.ones(1)}, t, 0.05)
    first = t["x"][0] == pytest.approx(0.05)
    gaps = [1 - t["x"][0]]
    for _ in range(10):
        soft_update({"x": np.ones(1)}, t, 0.05)
        gaps.append(1 - t["x"][0])
    checks["soft update"] = first and np.allclose(np.array(gaps[1:]) / gaps[:-1], 0.95)
    buf = PrioritizedReplay(100, 0.6, 1e-3, rng)
    for i in range(10_000):
        if len(buf) < 32 or rng.random() < 0.5:
            buf.add(i)
        else:
            buf.update(rng.integers(0, len(buf), 4), rng.uniform(1e-3, 10, 4))
    leaves = buf.tree.tree[buf.tree.n_leaves:]
    checks["sum tree"] = buf.tree.check() and buf.tree.total == pytest.approx(leaves.sum(), rel=1e-9)
    fd_err = _finite_difference_error(rng)
    checks["finite differences"] = fd_err < 1e-4
    failed = [k for k, v in checks.items() if not v]
    return not failed, f"max relative gradient error {fd_err:.2e}; failed checks: {failed or 'none'}"


class _Capture:
    def step(self, params, grads):
        self.grads = grads


def _finite_difference_error(rng):
    worst = 0.0
    for dueling in (True, False):
        net = QNetwork(2, [2, 2], (3, 3), dueling, False, 0.5, rng)
        obs = rng.standard_normal((5, 2))
        acts = np.stack([rng.integers(0, 2, 5), rng.integers(0, 2, 5)], axis=1)
        y = rng.standard_normal((5, 2))
        w = rng.uniform(0.2, 1.0, 5)
        cap = _Capture()
        td_update(net, cap, obs, acts, y, w, noise=False)

        def loss(p):
            q, _ = net.forward(obs, False, p)
            taken = np.stack([q[j][np.arange(5), acts[:, j]] for j in range(2)], axis=1)
            return float(np.mean(w[:, None] * (y - taken) ** 2))

        for k, v in net.params.items():
            for i in np.ndindex(v.shape):
                p = net.copy_params()
                p[k][i] += 1e-6
                up = loss(p)
                p[k][i] -= 2e-6
                fd = (up - loss(p)) / 2e-6
                g = cap.grads[k][i]
                worst = max(worst, abs(g - fd) / max(abs(g) + abs(fd), 1e-7))
    return worst


@criterion(6)
def test_c06_learning_progress(runs):
    parts, ok = [], True
    for seed in TRAIN_SEEDS:
        r = runs("rla", seed)
        rew = np.array([row["reward"] for row in r["art"].rows])
        first, last = rew[:50].mean(), rew[-50:].mean()
        ok &= bool(last > first) and r["wall"] <= 3600
        parts.append(f"seed {seed}: {first:.0f} -> {last:.0f} in {r['wall'] / 60:.1f} min")
    return ok, "; ".join(parts)


@criterion(7)
def test_c07_ordering(runs):
    means = {}
    for algo in ("rla", "alo", "ddqn", "fbs"):
        sdc = [row["sdc_bits"] for s in TRAIN_SEEDS for row in runs(algo, s)["eval"]["rows"]]
        means[algo] = float(np.mean(sdc))
    ok = means["rla"] >= means["alo"] >= means["fbs"] and means["rla"] >= means["ddqn"]
    n = len(TRAIN_SEEDS) * EVAL_EPISODES
    return ok, f"mean SDC over {n} evaluations: " + ", ".join(f"{a} {v:.3e}" for a, v in means.items())


@criterion(8)
def test_c08_ee_trend():
    pos = "500,500; 540,520; 470,460; 520,450; 460,540"
    ee = []
    for p in (10.0, 15.0, 20.0, 25.0):
        cfg = C.desk_profile(run__algo="fbs", scenario__node_positions=pos, link__p_max_dbm=p)
        res = harness.rollout_fixed(cfg, lambda env, s: harness.circling_policy(env, 0, 1), range(3),
                                    beam_mode="mmse")
        sched = min(len(rec["scheduled"]) for r in res for rec in r.records)
        assert sched >= 3, f"only {sched} nodes co-scheduled"
        ee.append(float(np.mean([r.ee for r in res])))
    ok = ee[1] >= ee[2] >= ee[3]
    return ok, "EE bits/J at 10/15/20/25 dBm: " + ", ".join(f"{v:.3e}" for v in ee)


@criterion(9)
def test_c09_jain(runs):
    k = C.desk_profile().scenario.n_nodes
    vals = [row["jain"] for algo in ("rla", "alo", "ddqn", "fbs") for s in TRAIN_SEEDS
            for row in runs(algo, s)["eval"]["rows"]]
    in_range = all(1 / k - 1e-12 <= v <= 1 + 1e-12 for v in vals)
    equal = jain_index(np.full(k, 3.0e8)) == 1.0
    single = jain_index([5.0e8] + [0.0] * (k - 1)) == 1 / k
    ok = in_range and equal and single
    return ok, (f"{len(vals)} episodes in [{min(vals):.3f}, {max(vals):.3f}]; equal case "
                f"{'exact' if equal else 'off'}; single-node case {'exact' if single else 'off'}")


@criterion(10)
def test_c10_determinism(tmp_path):
    same = {}
    for algo in ("rla", "alo", "ddqn", "fbs"):
        cfg = C.desk_profile(run__algo=algo, run__episodes=5, agent__learn_start=64,
                             agent__batch_size=32)
        a = harness.train(cfg, 7, str(tmp_path / f"{algo}-a"))
        b = harness.train(cfg, 7, str(tmp_path / f"{algo}-b"))
        same[algo] = (harness.strip_timing(a.metrics_csv) == harness.strip_timing(b.metrics_csv)
                      and open(a.trace_jsonl).read() == open(b.trace_jsonl).read())
    ok = all(same.values())
    return ok, ", ".join(f"{a} {'identical' if v else 'DIFFERENT'}" for a, v in same.items())


if __name__ == "__main__":
    here = os.path.dirname(os.path.abspath(__file__))
    sys.exit(pytest.main([os.path.join(here, "test_acceptance.py"), "-v", "-s"]))
