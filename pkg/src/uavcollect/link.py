"""Per-slot link budget and episode-level collection metrics."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


def dbm_to_watt(dbm: float) -> float:
    return 10.0 ** ((dbm - 30.0) / 10.0)


def watt_to_dbm(w: float) -> float:
    return 10.0 * np.log10(w) + 30.0


@dataclass(frozen=True)
class LinkParams:
    bandwidth: float = 80e6
    noise_power: float = dbm_to_watt(-100.0)
    p_max: float = dbm_to_watt(20.0)
    d_min_volume: float = 1e6

    def __post_init__(self):
        for name in ("bandwidth", "noise_power", "p_max", "d_min_volume"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")


@dataclass
class SlotLinkReport:
    slot: int
    sinr: np.ndarray       # (K,) linear, 0 for unscheduled nodes
    rate: np.ndarray       # (K,) bits/s/Hz
    volume: np.ndarray     # (K,) bits
    scheduled: np.ndarray  # (K,) bool
    power: np.ndarray      # (K,) watts actually radiated


def sinr(w, h_all, powers, target: int, noise_power: float, scheduled=None) -> float:
    """SINR of ``target`` after combining with ``w``; others in ``scheduled`` interfere."""
    w = np.asarray(w, dtype=complex)
    nw = np.vdot(w, w).real
    if nw <= 0:
        raise ValueError("zero combining vector")
    h_all = np.asarray(h_all)
    powers = np.asarray(powers, dtype=float)
    if scheduled is None:
        scheduled = range(h_all.shape[1])
    g = np.abs(w.conj() @ h_all) ** 2
    interf = sum(powers[j] * g[j] for j in scheduled if j != target)
    return float(powers[target] * g[target] / (interf + noise_power * nw))


def rate(s: float) -> float:
    if s < 0:
        raise ValueError("negative SINR")
    return float(np.log2(1.0 + s))


def slot_volume(r: float, scheduled: bool, tau: float, bandwidth: float) -> float:
    return tau * bandwidth * r if scheduled else 0.0


def link_report(slot: int, beams: dict, h_all, powers, scheduled_ids, link: LinkParams,
                tau: float) -> SlotLinkReport:
    """Evaluate every scheduled node's SINR/rate/volume for the given combiners."""
    k = np.asarray(h_all).shape[1]
    sched = np.zeros(k, dtype=bool)
    sched[list(scheduled_ids)] = True
    s = np.zeros(k)
    r = np.zeros(k)
    vol = np.zeros(k)
    for i in scheduled_ids:
        s[i] = sinr(beams[i], h_all, powers, i, link.noise_power, scheduled_ids)
        r[i] = rate(s[i])
        vol[i] = slot_volume(r[i], True, tau, link.bandwidth)
    radiated = np.where(sched, np.asarray(powers, dtype=float), 0.0)
    return SlotLinkReport(slot, s, r, vol, sched, radiated)


def per_node_totals(reports) -> np.ndarray:
    return np.sum([rep.volume for rep in reports], axis=0)


def sdc(reports) -> float:
    """Sum data collection over all slots and nodes (bits)."""
    return float(sum(rep.volume.sum() for rep in reports))


def fairness_satisfied(reports, d_th: float) -> np.ndarray:
    return per_node_totals(reports) >= d_th


def jain_index(totals) -> float:
    """Jain fairness of per-node totals; all-zero input counts as perfectly fair."""
    x = np.abs(np.asarray(totals, dtype=float))
    top = x.max(initial=0.0)
    if top == 0:
        return 1.0
    x = x / top  # avoids underflow of x*x on tiny totals
    j = x.sum() ** 2 / (len(x) * np.sum(x * x))
    return float(np.clip(j, 1.0 / len(x), 1.0))


def total_energy(reports, tau: float) -> float:
    return float(sum(rep.power[rep.scheduled].sum() for rep in reports) * tau)


def energy_efficiency(reports, tau: float) -> float:
    """Collected bits per joule of node transmit energy."""
    e = total_energy(reports, tau)
    if e <= 0:
        raise ValueError("no transmit energy spent; efficiency undefined")
    return sdc(reports) / e
