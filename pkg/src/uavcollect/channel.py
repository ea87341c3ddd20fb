"""Multipath air-to-ground channel seen by the UAV's uniform linear array.

Each node's channel is ``sqrt(chi / C) * Theta @ xi`` where ``chi`` is the
large-scale gain ``beta0 * d**-alpha``, the columns of ``Theta`` are array
steering vectors for the ``C`` path angles and ``xi`` holds unit-variance
circularly-symmetric Gaussian path gains.

Random draws come from a substream keyed on ``(seed, slot, node)`` so any
slot can be regenerated on its own. The draws do not depend on the array
size, which makes an ``M``-antenna channel the leading block of the same
channel drawn for more antennas.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .scenario import GroundNode, UavState, node_distance


@dataclass(frozen=True)
class ChannelParams:
    n_antennas: int = 8
    n_paths: int = 3
    pathloss_ref: float = 1e-3  # linear gain at 1 m (-30 dB)
    pathloss_exp: float = 2.2
    seed: int = 0

    def __post_init__(self):
        if self.n_antennas < 1 or self.n_paths < 1:
            raise ValueError("need at least one antenna and one path")
        if self.pathloss_ref <= 0:
            raise ValueError("pathloss_ref must be positive")


@dataclass(frozen=True)
class ChannelVector:
    entries: np.ndarray
    node: int
    slot: int


@dataclass(frozen=True)
class ChannelMatrix:
    columns: np.ndarray  # (M, K) complex
    slot: int

    @property
    def shape(self):
        return self.columns.shape


def substream(seed: int, slot: int, node: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([int(seed) & 0xFFFFFFFF, int(slot), int(node)]))


def steering_vector(aoa: float, m: int) -> np.ndarray:
    if m < 1:
        raise ValueError("m must be >= 1")
    return np.exp(1j * np.pi * np.arange(m) * np.sin(aoa))


def large_scale_gain(distance: float, params: ChannelParams) -> float:
    if distance <= 0:
        raise ValueError("UAV-node distance must be positive; check the altitude")
    return params.pathloss_ref * distance ** (-params.pathloss_exp)


def draw_paths(rng: np.random.Generator, n_paths: int):
    """NLoS angles and complex path gains, always drawn in this order."""
    nlos = rng.uniform(-np.pi / 2, np.pi / 2, size=n_paths - 1)
    xi = (rng.standard_normal(n_paths) + 1j * rng.standard_normal(n_paths)) / np.sqrt(2.0)
    return nlos, xi


def aoa_of_path(uav: UavState, node: GroundNode, path_index: int, rng: np.random.Generator) -> float:
    """Elevation angle for the line-of-sight path (index 1), a uniform draw otherwise."""
    if path_index < 1:
        raise ValueError("path_index starts at 1")
    if path_index == 1:
        return float(np.arcsin(min(1.0, uav.altitude / node_distance(uav, node))))
    return float(rng.uniform(-np.pi / 2, np.pi / 2))


def channel_vector(uav: UavState, node: GroundNode, params: ChannelParams, rng=None,
                   xi: np.ndarray | None = None) -> ChannelVector:
    """One node's channel; ``xi`` overrides the random path gains (testing hook)."""
    d = node_distance(uav, node)
    chi = large_scale_gain(d, params)
    if rng is None:
        rng = substream(params.seed, uav.slot, node.id)
    nlos, xi_draw = draw_paths(rng, params.n_paths)
    if xi is None:
        xi = xi_draw
    angles = np.concatenate([[aoa_of_path(uav, node, 1, rng)], nlos])
    theta = np.stack([steering_vector(a, params.n_antennas) for a in angles], axis=1)
    h = np.sqrt(chi / params.n_paths) * theta @ np.asarray(xi, dtype=complex)
    return ChannelVector(h, node.id, uav.slot)


def channel_matrix(uav: UavState, nodes, params: ChannelParams, seed: int | None = None,
                   slot: int | None = None) -> ChannelMatrix:
    """Stack per-node channels for one slot using the ``(seed, slot, node)`` substreams."""
    seed = params.seed if seed is None else seed
    slot = uav.slot if slot is None else slot
    cols = [channel_vector(uav, n, params, substream(seed, slot, n.id)).entries for n in nodes]
    return ChannelMatrix(np.stack(cols, axis=1), slot)
