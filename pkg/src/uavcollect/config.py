"""Experiment configuration stored as an INI-style ``key = value`` file.

Every block is a frozen dataclass with typed fields. Loading goes through
``configparser``; unknown keys and out-of-range values are rejected. The
hash of the canonical text form is written into every run artifact.
"""

from __future__ import annotations

import configparser
import hashlib
import io
from dataclasses import asdict, dataclass, field, fields, replace

import numpy as np

from .channel import ChannelParams
from .link import LinkParams, dbm_to_watt
from .scenario import CoverageRule, KinematicLimits, Region

ALGOS = ("rla", "alo", "ddqn", "fbs")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ScenarioBlock:
    region_x: float = 1000.0
    region_y: float = 1000.0
    n_nodes: int = 5
    node_positions: str = ""  # "x,y; x,y; ..." or empty for seeded uniform placement
    layout_seed: int = 2024   # -1 derives the layout from the episode seed
    altitude: float = 50.0
    slot_duration: float = 1.0
    n_slots: int = 30
    v_min: float = 5.0
    v_max: float = 17.0
    a_max: float = 10.0
    d_threshold: float = 250.0
    coverage_3d: bool = True
    start_x: float = -1.0     # negative means region centre
    start_y: float = -1.0

    def region(self) -> Region:
        return Region(self.region_x, self.region_y)

    def limits(self) -> KinematicLimits:
        return KinematicLimits(self.v_min, self.v_max, self.a_max, self.slot_duration, self.n_slots)

    def coverage(self) -> CoverageRule:
        return CoverageRule(self.d_threshold, self.coverage_3d)

    def start(self) -> np.ndarray:
        x = self.region_x / 2 if self.start_x < 0 else self.start_x
        y = self.region_y / 2 if self.start_y < 0 else self.start_y
        return np.array([x, y])

    def positions(self):
        if not self.node_positions.strip():
            return None
        pts = [[float(v) for v in p.split(",")] for p in self.node_positions.split(";") if p.strip()]
        return np.array(pts)


@dataclass(frozen=True)
class ChannelBlock:
    n_antennas: int = 8
    n_paths: int = 3
    pathloss_ref: float = 1e-3
    pathloss_exp: float = 2.2

    def params(self, seed: int) -> ChannelParams:
        return ChannelParams(self.n_antennas, self.n_paths, self.pathloss_ref, self.pathloss_exp, seed)


@dataclass(frozen=True)
class LinkBlock:
    bandwidth: float = 80e6
    noise_dbm: float = -100.0
    p_max_dbm: float = 20.0
    d_min_volume: float = 1e6

    def params(self) -> LinkParams:
        return LinkParams(self.bandwidth, dbm_to_watt(self.noise_dbm), dbm_to_watt(self.p_max_dbm),
                          self.d_min_volume)


@dataclass(frozen=True)
class EnvBlock:
    omega: float = 10.0
    p_out: float = 50.0
    reward_mode: str = "cumulative"  # or "incremental"
    volume_scale: float = -1.0       # negative means 1 / (tau * B)
    distance_levels: int = 3
    heading_levels: int = 8
    power_levels: int = 3
    obs_mode: str = "compact"        # or "raw"
    beam_mode: str = "auto"          # auto | sca | mmse | codebook | fixed
    codebook_size: int = 16
    fixed_codeword: int = 0
    fairness_floor: bool = True


@dataclass(frozen=True)
class AgentBlock:
    hidden1: int = 128
    hidden2: int = 128
    learning_rate: float = 5e-4
    gamma: float = 0.9
    batch_size: int = 64
    target_period: int = 10
    soft_tau: float = 0.05
    buffer_capacity: int = 20000
    learn_start: int = 300
    reward_scale: float = 0.01
    dueling: bool = True
    noisy: bool = True
    per: bool = True
    sigma0: float = 0.5
    per_alpha: float = 0.6
    per_beta0: float = 0.4
    per_beta1: float = 1.0
    priority_floor: float = 1e-3
    eps_start: float = 1.0
    eps_end: float = 0.05
    eps_fraction: float = 0.5  # share of training over which epsilon anneals


@dataclass(frozen=True)
class BeamBlock:
    max_iters: int = 20
    epsilon: float = 1e-4
    tolerance: float = 1e-8
    solver: str = "barrier"  # or "cvxpy"


@dataclass(frozen=True)
class RunBlock:
    algo: str = "rla"
    episodes: int = 300
    seeds: str = "0,1,2"
    eval_episodes: int = 10
    eval_seed_offset: int = 100000
    out_dir: str = "runs"
    trace_every: int = 1  # write the trace of every n-th training episode

    def seed_list(self):
        return [int(s) for s in self.seeds.split(",") if s.strip()]


_BLOCKS = {
    "scenario": ScenarioBlock,
    "channel": ChannelBlock,
    "link": LinkBlock,
    "env": EnvBlock,
    "agent": AgentBlock,
    "beamforming": BeamBlock,
    "run": RunBlock,
}


@dataclass(frozen=True)
class ExperimentConfig:
    scenario: ScenarioBlock = field(default_factory=ScenarioBlock)
    channel: ChannelBlock = field(default_factory=ChannelBlock)
    link: LinkBlock = field(default_factory=LinkBlock)
    env: EnvBlock = field(default_factory=EnvBlock)
    agent: AgentBlock = field(default_factory=AgentBlock)
    beamforming: BeamBlock = field(default_factory=BeamBlock)
    run: RunBlock = field(default_factory=RunBlock)

    def __post_init__(self):
        validate(self)

    def with_values(self, **overrides) -> "ExperimentConfig":
        """Override fields by ``block__name=value`` keywords."""
        blocks = {name: getattr(self, name) for name in _BLOCKS}
        for key, value in overrides.items():
            block, _, name = key.partition("__")
            if block not in blocks or name not in {f.name for f in fields(blocks[block])}:
                raise ConfigError(f"unknown config key {key!r}")
            blocks[block] = replace(blocks[block], **{name: value})
        return ExperimentConfig(**blocks)

    def volume_scale(self) -> float:
        s = self.env.volume_scale
        return 1.0 / (self.scenario.slot_duration * self.link.bandwidth) if s < 0 else s

    def beam_mode(self) -> str:
        if self.env.beam_mode != "auto":
            return self.env.beam_mode
        return {"rla": "sca", "alo": "codebook", "ddqn": "codebook", "fbs": "fixed"}[self.run.algo]

    def to_text(self) -> str:
        cp = configparser.ConfigParser()
        for name in _BLOCKS:
            cp[name] = {k: _fmt(v) for k, v in asdict(getattr(self, name)).items()}
        buf = io.StringIO()
        cp.write(buf)
        return buf.getvalue()

    def hash(self) -> str:
        """Digest of everything that influences results (output paths excluded)."""
        cfg = self.with_values(run__out_dir="")
        return hashlib.sha256(cfg.to_text().encode()).hexdigest()[:16]

    def save(self, path) -> None:
        with open(path, "w") as fh:
            fh.write(self.to_text())


def _fmt(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _parse(text: str, kind):
    if kind is bool:
        low = text.strip().lower()
        if low in ("true", "yes", "1", "on"):
            return True
        if low in ("false", "no", "0", "off"):
            return False
        raise ValueError(f"not a boolean: {text!r}")
    if kind is int:
        return int(text)
    if kind is float:
        return float(text)
    return text.strip()


def from_text(text: str) -> ExperimentConfig:
    cp = configparser.ConfigParser()
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"malformed config: {exc}") from exc
    blocks = {}
    for section in cp.sections():
        if section not in _BLOCKS:
            raise ConfigError(f"unknown section [{section}]")
    for name, cls in _BLOCKS.items():
        kinds = {f.name: f.type for f in fields(cls)}
        kw = {}
        if cp.has_section(name):
            for key, raw in cp[name].items():
                if key not in kinds:
                    raise ConfigError(f"unknown key {key!r} in [{name}]")
                kind = {"int": int, "float": float, "bool": bool, "str": str}[kinds[key]]
                try:
                    kw[key] = _parse(raw, kind)
                except ValueError as exc:
                    raise ConfigError(f"[{name}] {key}: {exc}") from exc
        blocks[name] = cls(**kw)
    return ExperimentConfig(**blocks)


def load(path) -> ExperimentConfig:
    try:
        with open(path) as fh:
            return from_text(fh.read())
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc


def _check(cond, msg):
    if not cond:
        raise ConfigError(msg)


def validate(cfg: ExperimentConfig) -> None:
    s, ch, ln, e, a, b, r = (cfg.scenario, cfg.channel, cfg.link, cfg.env, cfg.agent,
                             cfg.beamforming, cfg.run)
    try:
        region = s.region()
        s.limits()
        s.coverage()
        ch.params(0)
        ln.params()
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    _check(s.n_nodes >= 1, "n_nodes must be >= 1")
    _check(s.altitude > 0, "altitude must be positive")
    _check(region.contains(s.start()), f"start position {s.start()} outside the region")
    try:
        pts = s.positions()
    except ValueError as exc:
        raise ConfigError(f"bad node_positions: {exc}") from exc
    if pts is not None:
        _check(pts.shape == (s.n_nodes, 2), "node_positions must list n_nodes x,y pairs")
        _check(all(region.contains(p) for p in pts), "a node position lies outside the region")
    _check(e.reward_mode in ("cumulative", "incremental"), "reward_mode: cumulative|incremental")
    _check(e.obs_mode in ("compact", "raw"), "obs_mode: compact|raw")
    _check(e.beam_mode in ("auto", "sca", "mmse", "codebook", "fixed"), "bad beam_mode")
    _check(e.distance_levels >= 1 and e.heading_levels >= 1 and e.power_levels >= 2,
           "need >= 1 distance/heading level and >= 2 power levels")
    _check(e.codebook_size >= 1, "codebook_size must be >= 1")
    _check(0 <= e.fixed_codeword < e.codebook_size, "fixed_codeword out of codebook range")
    _check(e.omega >= 0 and e.p_out >= 0, "omega and p_out must be non-negative")
    _check(0 < a.gamma < 1, "gamma must lie in (0, 1)")
    _check(0 < a.soft_tau <= 1, "soft_tau must lie in (0, 1]")
    _check(a.learning_rate >= 0, "learning_rate must be non-negative")
    _check(a.batch_size >= 1 and a.buffer_capacity >= a.batch_size, "buffer smaller than batch")
    _check(a.hidden1 >= 1 and a.hidden2 >= 1, "hidden widths must be >= 1")
    _check(a.target_period >= 1, "target_period must be >= 1")
    _check(a.sigma0 >= 0 and a.priority_floor > 0, "sigma0 >= 0 and priority_floor > 0")
    _check(0 < a.per_alpha and 0 <= a.per_beta0 <= 1 and 0 <= a.per_beta1 <= 1, "PER exponents")
    _check(0 <= a.eps_end <= a.eps_start <= 1, "need 0 <= eps_end <= eps_start <= 1")
    _check(b.max_iters >= 1 and b.epsilon > 0 and b.tolerance > 0, "beamforming limits")
    _check(b.solver in ("barrier", "cvxpy"), "solver: barrier|cvxpy")
    _check(r.algo in ALGOS, f"algo must be one of {ALGOS}")
    _check(r.episodes >= 1 and r.eval_episodes >= 1, "episode counts must be >= 1")
    _check(r.trace_every >= 1, "trace_every must be >= 1")
    try:
        _check(len(r.seed_list()) >= 1, "need at least one seed")
    except ValueError as exc:
        raise ConfigError(f"bad seeds: {exc}") from exc


def desk_profile(**overrides) -> ExperimentConfig:
    """Laptop-scale defaults: K=5, M=8, C=3, N=30, 300 episodes."""
    return ExperimentConfig().with_values(**overrides)


def full_scale_profile(**overrides) -> ExperimentConfig:
    """Full-scale setting with K=20 nodes and M=30 antennas."""
    cfg = ExperimentConfig().with_values(scenario__n_nodes=20, channel__n_antennas=30,
                                         env__codebook_size=60, run__episodes=3000)
    return cfg.with_values(**overrides)
