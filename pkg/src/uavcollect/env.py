"""Episodic data-collection MDP with factored discrete actions.

One step moves the UAV, draws the slot channel at the new position,
schedules the covered nodes, obtains receive beamformers in the configured
way and books the collected volume. The reward is

    r[n] = scale * sum_{i<=n} sum_k D_k[i] + omega * #(nodes covered so far) - P_out * oob[n]

in the default cumulative mode; the incremental mode keeps only the slot-n
volume in the first term.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import beamforming as bf
from .channel import channel_matrix
from .config import ExperimentConfig
from .link import SlotLinkReport, link_report
from .scenario import (UavState, advance_uav, feasible_action_mask, node_distance,
                       place_nodes, scheduled_set)


class EpisodeDone(RuntimeError):
    """Raised when stepping an environment whose episode has finished."""


@dataclass(frozen=True)
class FactoredAction:
    distance_index: int
    heading_index: int
    power_index: tuple
    beam_index: tuple = ()

    def as_dict(self) -> dict:
        return {"distance": int(self.distance_index), "heading": int(self.heading_index),
                "power": [int(p) for p in self.power_index],
                "beam": [int(b) for b in self.beam_index]}


@dataclass(frozen=True)
class RewardBreakdown:
    volume_term: float
    coverage_bonus: float
    penalty: float

    @property
    def total(self) -> float:
        return self.volume_term + self.coverage_bonus - self.penalty

    def as_dict(self) -> dict:
        return {"volume": self.volume_term, "bonus": self.coverage_bonus,
                "penalty": self.penalty, "total": self.total}


@dataclass
class Transition:
    obs: np.ndarray
    action: FactoredAction
    reward: float
    next_obs: np.ndarray
    done: bool
    next_mask: np.ndarray | None = None


@dataclass
class StepInfo:
    report: SlotLinkReport
    reward: RewardBreakdown
    out_of_bounds: bool
    floor_infeasible: int = 0
    record: dict = field(default_factory=dict)


def compute_reward(volume_history, coverage_history, oob: bool, omega: float, p_out: float,
                   mode: str = "cumulative", scale: float = 1.0) -> RewardBreakdown:
    """Reward of the latest slot from per-slot volumes and coverage indicators.

    ``volume_history`` and ``coverage_history`` are sequences over slots
    ``1..n`` of per-node arrays.
    """
    if len(volume_history) == 0:
        vol = 0.0
    elif mode == "cumulative":
        vol = float(np.sum([np.sum(v) for v in volume_history]))
    elif mode == "incremental":
        vol = float(np.sum(volume_history[-1]))
    else:
        raise ValueError(f"unknown reward mode {mode!r}")
    if len(coverage_history):
        ever = np.minimum(1, np.sum(np.asarray(coverage_history, dtype=int), axis=0))
        bonus = omega * float(np.sum(ever))
    else:
        bonus = 0.0
    return RewardBreakdown(vol * scale, bonus, p_out if oob else 0.0)


def distance_levels(cfg: ExperimentConfig) -> np.ndarray:
    s = cfg.scenario
    lo, hi = s.v_min * s.slot_duration, s.v_max * s.slot_duration
    n = cfg.env.distance_levels
    return np.array([lo]) if n == 1 else np.linspace(lo, hi, n)


def heading_levels(cfg: ExperimentConfig) -> np.ndarray:
    return 2 * np.pi * np.arange(cfg.env.heading_levels) / cfg.env.heading_levels


def power_levels(cfg: ExperimentConfig) -> np.ndarray:
    return np.linspace(0.0, cfg.link.params().p_max, cfg.env.power_levels)


class DataCollectionEnv:
    """Single-UAV data-collection episode driver.

    ``beam_mode`` is one of ``sca`` (convex inner loop), ``mmse`` (closed-form
    oracle), ``codebook`` (per-node codeword from the action) and ``fixed``
    (one codeword for everyone).
    """

    def __init__(self, cfg: ExperimentConfig, beam_mode: str | None = None):
        self.cfg = cfg
        self.beam_mode = beam_mode or cfg.beam_mode()
        self.region = cfg.scenario.region()
        self.limits = cfg.scenario.limits()
        self.rule = cfg.scenario.coverage()
        self.link = cfg.link.params()
        self.k = cfg.scenario.n_nodes
        self.m = cfg.channel.n_antennas
        self.d_levels = distance_levels(cfg)
        self.h_levels = heading_levels(cfg)
        self.p_levels = power_levels(cfg)
        self.codebook = bf.build_dft_codebook(self.m, cfg.env.codebook_size)
        self.scale = cfg.volume_scale()
        self.nodes = None
        self.state = None
        self.done = True

    # -- shapes -------------------------------------------------------------
    @property
    def uses_beam_actions(self) -> bool:
        return self.beam_mode == "codebook"

    def branch_sizes(self) -> list[int]:
        sizes = [len(self.d_levels), len(self.h_levels)] + [len(self.p_levels)] * self.k
        if self.uses_beam_actions:
            sizes += [len(self.codebook)] * self.k
        return sizes

    @property
    def obs_dim(self) -> int:
        per_node = 2 * self.m if self.cfg.env.obs_mode == "raw" else 2
        return 4 + self.k * (2 + per_node + 1) + 1

    # -- episode ------------------------------------------------------------
    def reset(self, seed: int) -> np.ndarray:
        s = self.cfg.scenario
        self.seed = int(seed)
        layout_seed = self.seed if s.layout_seed < 0 else s.layout_seed
        self.nodes = place_nodes(self.region, self.k, np.random.default_rng(layout_seed),
                                 s.positions())
        self.state = UavState(s.start(), s.altitude, None, 1)
        self.vol_hist = []
        self.cov_hist = []
        self.banked = np.zeros(self.k)  # rates already collected, bits/s/Hz
        self.done = False
        self.h = self._channel(0)
        return self.observe()

    def _channel(self, slot: int) -> np.ndarray:
        params = self.cfg.channel.params(self.seed)
        return channel_matrix(self.state, self.nodes, params, self.seed, slot).columns

    def action_mask(self) -> np.ndarray:
        return feasible_action_mask(self.state, self.d_levels, self.h_levels, self.limits)

    def observe(self) -> np.ndarray:
        st = self.state
        pos = np.asarray(st.position) / [self.region.x_max, self.region.y_max]
        vel = np.zeros(2) if st.velocity is None else np.asarray(st.velocity) / self.limits.v_max
        feats = [pos, vel]
        node_pos = np.array([n.position for n in self.nodes]) / [self.region.x_max, self.region.y_max]
        snr = self.link.p_max / self.link.noise_power
        if self.cfg.env.obs_mode == "raw":
            hs = self.h * np.sqrt(snr) / 100.0
            chan = np.concatenate([hs.real.T, hs.imag.T], axis=1)
        else:
            g = np.sum(np.abs(self.h) ** 2, axis=0)
            gain_db = 10 * np.log10(np.maximum(g * snr, 1e-30)) / 50.0
            dist = np.array([node_distance(st, n) for n in self.nodes]) / self.region.diagonal
            chan = np.stack([gain_db, dist], axis=1)
        visited = np.zeros(self.k)
        if self.cov_hist:
            visited = np.minimum(1, np.sum(self.cov_hist, axis=0))
        feats += [node_pos.ravel(), chan.ravel(), visited,
                  [(st.slot - 1) / self.limits.n_slots]]
        return np.concatenate([np.ravel(f) for f in feats]).astype(float)

    def step(self, action: FactoredAction):
        """Advance one slot; returns ``(obs, reward, done, info)``."""
        if self.done:
            raise EpisodeDone("episode finished; call reset() first")
        n = self.state.slot
        self._check_action(action)
        d = self.d_levels[action.distance_index]
        th = self.h_levels[action.heading_index]
        self.state, oob = advance_uav(self.state, d, th, self.limits, self.region)
        self.h = self._channel(n)
        sched = scheduled_set(self.state, self.nodes, self.rule)
        powers = self.p_levels[np.asarray(action.power_index, dtype=int)]
        beams, infeasible = self._beamformers(sched, powers, action)
        active = sorted(beams)
        report = link_report(n, beams, self.h, powers, active, self.link, self.limits.slot_duration)
        report.scheduled[:] = False
        report.scheduled[sched] = True
        cover = np.zeros(self.k, dtype=int)
        cover[sched] = 1
        self.vol_hist.append(report.volume.copy())
        self.cov_hist.append(cover)
        self.banked += report.rate
        rb = compute_reward(self.vol_hist, self.cov_hist, oob, self.cfg.env.omega,
                            self.cfg.env.p_out, self.cfg.env.reward_mode, self.scale)
        self.done = n >= self.limits.n_slots
        obs = self.observe()
        record = {
            "slot": n,
            "position": [float(v) for v in self.state.position],
            "altitude": float(self.state.altitude),
            "velocity": [float(v) for v in self.state.velocity],
            "action": action.as_dict(),
            "scheduled": [int(i) for i in sched],
            "power": [float(p) for p in report.power],
            "rate": [float(v) for v in report.rate],
            "volume": [float(v) for v in report.volume],
            "out_of_bounds": bool(oob),
            "floor_infeasible": int(infeasible),
            "reward": rb.as_dict(),
        }
        return obs, rb.total, self.done, StepInfo(report, rb, oob, infeasible, record)

    def _check_action(self, a: FactoredAction):
        if not 0 <= a.distance_index < len(self.d_levels):
            raise ValueError("distance_index out of range")
        if not 0 <= a.heading_index < len(self.h_levels):
            raise ValueError("heading_index out of range")
        if len(a.power_index) != self.k or not all(0 <= p < len(self.p_levels) for p in a.power_index):
            raise ValueError("power_index must hold one valid level per node")
        if self.uses_beam_actions:
            if len(a.beam_index) != self.k or not all(0 <= b < len(self.codebook) for b in a.beam_index):
                raise ValueError("beam_index must hold one valid codeword per node")

    def _beamformers(self, sched, powers, action):
        """Combiners for scheduled nodes that transmit; returns ``(dict, #floor flags)``."""
        active = [k for k in sched if powers[k] > 0]
        if not active:
            return {}, 0
        mode = self.beam_mode
        if mode == "codebook":
            return {k: self.codebook[action.beam_index[k]] for k in active}, 0
        if mode == "fixed":
            w = self.codebook[self.cfg.env.fixed_codeword]
            return {k: w for k in active}, 0
        # the inner problem only sees the transmitting nodes
        floors = None
        if self.cfg.env.fairness_floor:
            need = self.link.d_min_volume / (self.limits.slot_duration * self.link.bandwidth)
            floors = np.maximum(0.0, need - self.banked[active])
        inst = bf.BeamInstance(self.h[:, active], powers[active], self.link.noise_power,
                               floors=floors, ids=active)
        if mode == "mmse":
            out = bf.mmse_beamformers(inst)
            return dict(zip(active, out.vectors)), 0
        if mode == "sca":
            b = self.cfg.beamforming
            out = bf.sca_optimize(inst, b.max_iters, b.epsilon, b.solver, b.tolerance)
            return dict(zip(active, out.vectors)), int(np.sum(out.diagnostics["infeasible"]))
        raise ValueError(f"unknown beam mode {mode!r}")
