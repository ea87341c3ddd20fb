"""Training, evaluation and sweep drivers plus run artifacts.

A run directory holds ``config.ini`` (resolved configuration), ``metrics.csv``
(one row per episode, wall time as the last column), ``trace.jsonl`` (one
record per slot) and ``checkpoint.bin``. Everything except the wall-time
column is a deterministic function of the configuration and seed.
"""

from __future__ import annotations

import csv
import io
import json
import os
import tempfile
import time
from dataclasses import dataclass, field

import numpy as np

from . import checkpoint as ckpt
from . import config as C
from . import link
from .agent import BranchingAgent, NonFiniteLoss, make_ddqn_baseline
from .env import DataCollectionEnv, FactoredAction
from .scenario import kinematic_violations

METRIC_FIELDS = ["episode", "env_seed", "reward", "sdc_bits", "ee_bits_per_joule", "jain",
                 "fairness_violations", "floor_infeasible", "oob_count", "loss",
                 "reward_mean50", "sdc_mean50", "config_hash", "wall_time_s"]
TIMING_FIELDS = ("wall_time_s",)
SWEEP_AXES = {"antennas": "channel__n_antennas", "power": "link__p_max_dbm",
              "n_nodes": "scenario__n_nodes"}


class TrainingAborted(RuntimeError):
    pass


@dataclass
class EpisodeResult:
    reward: float
    sdc: float
    ee: float
    jain: float
    fairness_violations: int
    floor_infeasible: int
    oob_count: int
    loss: float = float("nan")
    records: list = field(default_factory=list)
    reports: list = field(default_factory=list)


@dataclass
class RunArtifacts:
    directory: str
    metrics_csv: str
    trace_jsonl: str
    checkpoint: str
    config_path: str
    rows: list


def episode_seed(run_seed: int, episode: int) -> int:
    return int(np.random.SeedSequence([int(run_seed), int(episode)]).generate_state(1)[0])


def indices_to_action(idx, k: int, beams: bool) -> FactoredAction:
    idx = [int(i) for i in idx]
    return FactoredAction(idx[0], idx[1], tuple(idx[2:2 + k]), tuple(idx[2 + k:2 + 2 * k]) if beams else ())


def action_to_indices(a: FactoredAction) -> np.ndarray:
    return np.array([a.distance_index, a.heading_index, *a.power_index, *a.beam_index], dtype=int)


# -- policies -------------------------------------------------------------------

class RandomFlightPolicy:
    """Fixed-beam baseline: uniform feasible move, every node at full power."""

    def __init__(self, env: DataCollectionEnv, seed: int):
        self.env = env
        self.rng = np.random.default_rng(np.random.SeedSequence([int(seed), 11]))

    def __call__(self, obs, mask):
        feas = np.flatnonzero(mask.ravel())
        d, h = np.unravel_index(int(self.rng.choice(feas)), mask.shape)
        k = self.env.k
        top = len(self.env.p_levels) - 1
        beams = [self.env.cfg.env.fixed_codeword] * k if self.env.uses_beam_actions else []
        return np.array([d, h] + [top] * k + beams, dtype=int)


class AgentPolicy:
    def __init__(self, agent: BranchingAgent, explore: bool):
        self.agent = agent
        self.explore = explore

    def __call__(self, obs, mask):
        return self.agent.select(obs, mask, self.explore)


def circling_policy(env: DataCollectionEnv, distance_index: int = 0, turn: int = 1):
    """Scripted loop: constant distance level, heading advanced by ``turn`` each slot, full power."""
    state = {"n": 0}

    def policy(obs, mask):
        h = (state["n"] * turn) % len(env.h_levels)
        state["n"] += 1
        top = len(env.p_levels) - 1
        beams = [env.cfg.env.fixed_codeword] * env.k if env.uses_beam_actions else []
        return np.array([distance_index, h] + [top] * env.k + beams, dtype=int)

    return policy


# -- episodes -------------------------------------------------------------------

def run_episode(env: DataCollectionEnv, policy, seed: int, agent: BranchingAgent | None = None,
                learn: bool = False) -> EpisodeResult:
    obs = env.reset(seed)
    total = 0.0
    records, reports, losses = [], [], []
    oob = infeasible = 0
    done = False
    while not done:
        mask = env.action_mask()
        idx = policy(obs, mask)
        if not mask[idx[0], idx[1]]:
            raise RuntimeError("policy emitted a masked kinematic action")
        action = indices_to_action(idx, env.k, env.uses_beam_actions)
        nxt, r, done, info = env.step(action)
        total += r
        oob += int(info.out_of_bounds)
        infeasible += info.floor_infeasible
        records.append(info.record)
        reports.append(info.report)
        if learn and agent is not None:
            agent.store(obs, idx, r, nxt, done, env.action_mask())
            try:
                loss = agent.learn()
            except NonFiniteLoss as exc:
                raise TrainingAborted(f"non-finite training loss at env step {agent.env_steps}: {exc}")
            if loss is not None:
                losses.append(loss)
        obs = nxt
    tau = env.limits.slot_duration
    sdc = link.sdc(reports)
    energy = link.total_energy(reports, tau)
    ee = sdc / energy if energy > 0 else float("nan")  # undefined without transmissions
    totals = link.per_node_totals(reports)
    return EpisodeResult(total, sdc, ee, link.jain_index(totals),
                         int(np.sum(totals < env.link.d_min_volume)), infeasible, oob,
                         float(np.mean(losses)) if losses else float("nan"), records, reports)


def make_agent(cfg: C.ExperimentConfig, env: DataCollectionEnv, seed: int) -> BranchingAgent | None:
    algo = cfg.run.algo
    if algo == "fbs":
        return None
    hp = make_ddqn_baseline(cfg.agent) if algo == "ddqn" else cfg.agent
    total = cfg.run.episodes * cfg.scenario.n_slots
    return BranchingAgent(env.obs_dim, env.branch_sizes(), hp, seed, total)


def _row(ep, env_seed, res: EpisodeResult, history, cfg_hash, wall):
    rw = [h.reward for h in history[-50:]]
    sd = [h.sdc for h in history[-50:]]
    return {"episode": ep, "env_seed": env_seed, "reward": res.reward, "sdc_bits": res.sdc,
            "ee_bits_per_joule": res.ee, "jain": res.jain,
            "fairness_violations": res.fairness_violations,
            "floor_infeasible": res.floor_infeasible, "oob_count": res.oob_count,
            "loss": res.loss, "reward_mean50": float(np.mean(rw)),
            "sdc_mean50": float(np.mean(sd)), "config_hash": cfg_hash, "wall_time_s": wall}


def _fmt(v):
    return repr(float(v)) if isinstance(v, (float, np.floating)) else str(v)


def write_metrics(path, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(METRIC_FIELDS)
        for r in rows:
            w.writerow([_fmt(r[k]) for k in METRIC_FIELDS])


def read_metrics(path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def strip_timing(path) -> str:
    """Metrics CSV text without the timing columns (for reproducibility checks)."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    keep = [i for i, name in enumerate(rows[0]) if name not in TIMING_FIELDS]
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    for r in rows:
        w.writerow([r[i] for i in keep])
    return buf.getvalue()


# -- train / evaluate -------------------------------------------------------------

def train(cfg: C.ExperimentConfig, seed: int | None = None, out_dir: str | None = None,
          progress=None) -> RunArtifacts:
    """Run ``cfg.run.episodes`` training episodes of ``cfg.run.algo`` and write the artifacts."""
    seed = cfg.run.seed_list()[0] if seed is None else int(seed)
    out = out_dir or os.path.join(cfg.run.out_dir, f"{cfg.run.algo}-seed{seed}")
    os.makedirs(out, exist_ok=True)
    cfg.save(os.path.join(out, "config.ini"))
    h = cfg.hash()
    env = DataCollectionEnv(cfg)
    agent = make_agent(cfg, env, seed)
    rows, history = [], []
    trace_path = os.path.join(out, "trace.jsonl")
    with open(trace_path, "w") as trace:
        for ep in range(cfg.run.episodes):
            t0 = time.perf_counter()
            es = episode_seed(seed, ep)
            if agent is None:
                policy = RandomFlightPolicy(env, es)
            else:
                policy = AgentPolicy(agent, explore=True)
            res = run_episode(env, policy, es, agent, learn=agent is not None)
            history.append(res)
            rows.append(_row(ep, es, res, history, h, time.perf_counter() - t0))
            if ep % cfg.run.trace_every == 0:
                _write_trace(trace, ep, es, res, h)
            if progress:
                progress(ep, res)
    metrics_path = os.path.join(out, "metrics.csv")
    write_metrics(metrics_path, rows)
    ck_path = os.path.join(out, "checkpoint.bin")
    save_run_checkpoint(ck_path, cfg, seed, agent)
    return RunArtifacts(out, metrics_path, trace_path, ck_path, os.path.join(out, "config.ini"), rows)


def _write_trace(fh, ep, env_seed, res: EpisodeResult, cfg_hash):
    for rec in res.records:
        line = {"episode": ep, "env_seed": env_seed, "config_hash": cfg_hash, **rec}
        fh.write(json.dumps(line, sort_keys=True) + "\n")


def save_run_checkpoint(path, cfg, seed, agent):
    tensors = agent.tensors() if agent is not None else {}
    meta = {"algo": cfg.run.algo, "seed": seed, "config_hash": cfg.hash(),
            "config": cfg.to_text(),
            "branch_sizes": agent.branch_sizes if agent is not None else [],
            "obs_dim": agent.online.obs_dim if agent is not None else 0}
    ckpt.save(path, tensors, meta)


def load_policy_checkpoint(path, cfg: C.ExperimentConfig | None = None):
    """Rebuild ``(cfg, agent)`` from a checkpoint; ``agent`` is ``None`` for the fixed-beam baseline."""
    tensors, meta = ckpt.load(path)
    stored = C.from_text(meta["config"])
    cfg = stored if cfg is None else cfg
    env = DataCollectionEnv(cfg)
    if cfg.run.algo != meta["algo"]:
        raise ValueError(f"checkpoint holds algo {meta['algo']!r}, config asks for {cfg.run.algo!r}")
    if meta["algo"] == "fbs":
        return cfg, None
    if list(meta["branch_sizes"]) != env.branch_sizes() or meta["obs_dim"] != env.obs_dim:
        raise ValueError("checkpoint arities do not match the configuration")
    agent = make_agent(cfg, env, meta["seed"])
    agent.load_tensors(tensors)
    return cfg, agent


def evaluation_seeds(cfg: C.ExperimentConfig, n: int):
    return [cfg.run.eval_seed_offset + i for i in range(n)]


def evaluate(checkpoint_path, n_episodes: int | None = None, cfg: C.ExperimentConfig | None = None,
             seeds=None, out_dir: str | None = None) -> dict:
    """Frozen-policy rollouts (no noise, no exploration) over evaluation seeds."""
    cfg, agent = load_policy_checkpoint(checkpoint_path, cfg)
    n = cfg.run.eval_episodes if n_episodes is None else int(n_episodes)
    seeds = evaluation_seeds(cfg, n) if seeds is None else list(seeds)
    env = DataCollectionEnv(cfg)
    h = cfg.hash()
    rows, history, results = [], [], []
    for i, s in enumerate(seeds):
        t0 = time.perf_counter()
        policy = RandomFlightPolicy(env, s) if agent is None else AgentPolicy(agent, explore=False)
        res = run_episode(env, policy, s)
        history.append(res)
        results.append(res)
        rows.append(_row(i, s, res, history, h, time.perf_counter() - t0))
    summary = summarize(rows)
    if out_dir:
        os.makedirs(out_dir, exist_ok=True)
        write_metrics(os.path.join(out_dir, "eval_metrics.csv"), rows)
        with open(os.path.join(out_dir, "eval_trace.jsonl"), "w") as fh:
            for i, (s, res) in enumerate(zip(seeds, results)):
                _write_trace(fh, i, s, res, h)
        with open(os.path.join(out_dir, "eval_summary.json"), "w") as fh:
            json.dump(summary, fh, indent=2, sort_keys=True)
    return {"rows": rows, "summary": summary, "results": results}


def summarize(rows) -> dict:
    out = {"episodes": len(rows)}
    for key, name in (("sdc_bits", "sdc"), ("ee_bits_per_joule", "ee"), ("jain", "jain"),
                      ("reward", "reward")):
        vals = np.array([float(r[key]) for r in rows])
        if np.all(np.isnan(vals)):
            out[f"{name}_mean"] = out[f"{name}_std"] = float("nan")
            continue
        out[f"{name}_mean"] = float(np.nanmean(vals))
        out[f"{name}_std"] = float(np.nanstd(vals))
    return out


def rollout_fixed(cfg: C.ExperimentConfig, policy_factory, seeds, beam_mode: str | None = None):
    """Evaluate a non-learning policy (``policy_factory(env, seed)``) over seeds."""
    env = DataCollectionEnv(cfg, beam_mode)
    return [run_episode(env, policy_factory(env, s), s) for s in seeds]


# -- sweep ----------------------------------------------------------------------

def sweep(cfg: C.ExperimentConfig, axis: str, values, algos=C.ALGOS, seed: int | None = None,
          out_dir: str | None = None, progress=None) -> dict:
    """Train and evaluate every algorithm at every axis value.

    Returns ``{metric: [{"value": v, algo: mean, ...}, ...]}`` for SDC, EE and
    Jain; with ``out_dir`` each table is also written as CSV.
    """
    if axis not in SWEEP_AXES:
        raise ValueError(f"axis must be one of {sorted(SWEEP_AXES)}")
    seed = cfg.run.seed_list()[0] if seed is None else seed
    tables = {"sdc": [], "ee": [], "jain": []}
    for v in values:
        over = {SWEEP_AXES[axis]: (float if axis == "power" else int)(v)}
        if axis == "antennas":
            over["env__codebook_size"] = 2 * int(v)
        if axis == "n_nodes":
            over["scenario__node_positions"] = ""
        row = {m: {"value": v} for m in tables}
        for algo in algos:
            c = cfg.with_values(run__algo=algo, **over)
            if out_dir:
                run_dir = os.path.join(out_dir, f"{axis}={v}", algo)
            else:
                run_dir = tempfile.mkdtemp(prefix="sweep-")
            art = train(c, seed, run_dir)
            summ = evaluate(art.checkpoint, c.run.eval_episodes, c)["summary"]
            for m in tables:
                row[m][algo] = summ[f"{m}_mean"]
            if progress:
                progress(v, algo, summ)
        for m in tables:
            tables[m].append(row[m])
    if out_dir:
        for m, rows in tables.items():
            with open(os.path.join(out_dir, f"sweep_{axis}_{m}.csv"), "w", newline="") as fh:
                w = csv.writer(fh, lineterminator="\n")
                w.writerow(["value", *algos])
                for r in rows:
                    w.writerow([r["value"]] + [_fmt(r[a]) for a in algos])
    return tables


# -- trajectory export ---------------------------------------------------------

def load_trace(path) -> dict:
    """Trace records grouped by episode."""
    eps = {}
    with open(path) as fh:
        for line in fh:
            rec = json.loads(line)
            eps.setdefault(rec["episode"], []).append(rec)
    return eps


def export_traces(trace_path, out_dir, limits=None) -> list[str]:
    """One trajectory CSV per episode: slot, x, y, z, speed, scheduled count.

    When ``limits`` is given, each trajectory is re-checked against the
    kinematic constraints before it is written.
    """
    os.makedirs(out_dir, exist_ok=True)
    paths = []
    for ep, recs in sorted(load_trace(trace_path).items()):
        if limits is not None:
            bad = kinematic_violations([r["velocity"] for r in recs], limits)
            if bad:
                raise ValueError(f"episode {ep}: {bad} kinematic violations in the trace")
        path = os.path.join(out_dir, f"trajectory_ep{ep:04d}.csv")
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["slot", "x", "y", "z", "speed", "scheduled_count"])
            for r in recs:
                x, y = r["position"]
                w.writerow([r["slot"], repr(x), repr(y), repr(r["altitude"]),
                            repr(float(np.hypot(*r["velocity"]))), len(r["scheduled"])])
        paths.append(path)
    return paths


def sdc_from_trace(trace_path) -> dict:
    """Per-episode SDC recomputed from the logged per-slot volumes."""
    return {ep: float(sum(np.sum(r["volume"]) for r in recs))
            for ep, recs in load_trace(trace_path).items()}
