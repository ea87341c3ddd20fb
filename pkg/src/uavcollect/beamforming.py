"""Receive beamforming for the nodes scheduled in one slot.

The main route lifts each combiner to ``W_k = w_k w_k^H``, drops the rank
constraint and runs successive convex approximation: the subtracted log term
of each node's rate is replaced by its first-order expansion at the current
iterate, which gives a concave lower bound that is maximised exactly by an
interior-point solve. A rank-one combiner is read off the final matrix with a
probe vector. The closed-form MMSE combiner is kept as an independent oracle,
and DFT codebooks serve the fully learned and fixed-beam policies.

All covariances are normalised by the noise power: with ``g_i = P_i/sigma^2``
node ``k`` sees ``A_k = sum_i g_i h_i h_i^H + I`` (signal plus interference
plus noise) and ``B_k = A_k - g_k h_k h_k^H``. Rates are
``log2(tr(A_k W) / tr(B_k W))``, which is unchanged by the normalisation.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from . import link
from .sdp import maximize_log_linear, maximize_log_linear_cvxpy

LOG2E = 1.0 / np.log(2.0)


@dataclass
class BeamInstance:
    channels: np.ndarray  # (M, S) columns of the scheduled nodes
    powers: np.ndarray    # (S,) watts
    noise_power: float
    floors: np.ndarray | None = None  # (S,) bits/s/Hz still owed, None = no floor
    ids: list = field(default_factory=list)

    def __post_init__(self):
        self.channels = np.atleast_2d(np.asarray(self.channels, dtype=complex))
        self.powers = np.asarray(self.powers, dtype=float).reshape(-1)
        if not self.ids:
            self.ids = list(range(self.channels.shape[1]))
        if self.channels.shape[1] != len(self.powers) or len(self.ids) != len(self.powers):
            raise ValueError("channels, powers and ids disagree on the number of nodes")
        if len(self.ids) < 1:
            raise ValueError("a beam instance needs at least one scheduled node")
        if self.noise_power <= 0:
            raise ValueError("noise power must be positive")
        if np.any(self.powers < 0):
            raise ValueError("negative transmit power")
        if self.floors is not None:
            self.floors = np.asarray(self.floors, dtype=float).reshape(-1)

    @property
    def n_antennas(self) -> int:
        return self.channels.shape[0]

    @property
    def n_nodes(self) -> int:
        return self.channels.shape[1]

    def gains(self) -> np.ndarray:
        return self.powers / self.noise_power

    def total_covariance(self) -> np.ndarray:
        h = self.channels
        return (h * self.gains()) @ h.conj().T + np.eye(self.n_antennas)

    def covariances(self, k: int):
        """Normalised ``(A_k, B_k)`` for local node index ``k``."""
        a = self.total_covariance()
        hk = self.channels[:, k]
        b = a - self.gains()[k] * np.outer(hk, hk.conj())
        return a, b

    def to_json(self) -> dict:
        return {
            "ids": [int(i) for i in self.ids],
            "channels": [complex_to_pairs(self.channels[:, k]) for k in range(self.n_nodes)],
            "powers": self.powers.tolist(),
            "noise_power": float(self.noise_power),
            "floors": None if self.floors is None else self.floors.tolist(),
        }

    @classmethod
    def from_json(cls, doc: dict) -> "BeamInstance":
        cols = [pairs_to_complex(c) for c in doc["channels"]]
        return cls(
            channels=np.stack(cols, axis=1),
            powers=np.asarray(doc["powers"], dtype=float),
            noise_power=float(doc["noise_power"]),
            floors=None if doc.get("floors") is None else np.asarray(doc["floors"], dtype=float),
            ids=list(doc.get("ids") or range(len(cols))),
        )


def complex_to_pairs(z) -> list:
    return [[float(v.real), float(v.imag)] for v in np.asarray(z, dtype=complex).ravel()]


def pairs_to_complex(pairs) -> np.ndarray:
    arr = np.asarray(pairs, dtype=float).reshape(-1, 2)
    return arr[:, 0] + 1j * arr[:, 1]


@dataclass
class SdpIterate:
    mats: list
    index: int = 0
    infeasible: np.ndarray | None = None

    def check(self, tol: float = 1e-8):
        for w in self.mats:
            if np.max(np.abs(w - w.conj().T)) > 1e-9:
                raise ValueError("iterate is not Hermitian")
            if np.linalg.eigvalsh(w)[0] < -tol:
                raise ValueError("iterate is not PSD")
            if np.trace(w).real > 1 + 1e-9:
                raise ValueError("iterate trace exceeds one")


@dataclass
class BeamformerSet:
    ids: list
    vectors: list
    rates: np.ndarray
    sinr: np.ndarray
    diagnostics: dict = field(default_factory=dict)

    def vector_for(self, node_id):
        return self.vectors[self.ids.index(node_id)]

    def as_dict(self) -> dict:
        return dict(zip(self.ids, self.vectors))

    def to_json(self) -> dict:
        return {
            "ids": [int(i) for i in self.ids],
            "beamformers": [complex_to_pairs(v) for v in self.vectors],
            "rates": [float(r) for r in self.rates],
            "sinr": [float(s) for s in self.sinr],
            "diagnostics": _jsonable(self.diagnostics),
        }


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    return obj


def evaluate(instance: BeamInstance, vectors, diagnostics=None) -> BeamformerSet:
    """Rates of given combiners through the link-level SINR."""
    s = np.array([
        link.sinr(vectors[k], instance.channels, instance.powers, k, instance.noise_power)
        for k in range(instance.n_nodes)
    ])
    r = np.array([link.rate(v) for v in s])
    return BeamformerSet(list(instance.ids), [np.asarray(v) for v in vectors], r, s,
                         diagnostics or {})


# --- closed-form oracle ------------------------------------------------------

def mmse_beamformers(instance: BeamInstance) -> BeamformerSet:
    """Per-node SINR-maximising combiners ``w_k ~ A^-1 h_k`` scaled to unit norm."""
    a = instance.total_covariance()
    sol = np.linalg.solve(a, instance.channels)
    vectors = [sol[:, k] / np.linalg.norm(sol[:, k]) for k in range(instance.n_nodes)]
    return evaluate(instance, vectors, {"method": "mmse"})


def mmse_sinr(instance: BeamInstance, k: int) -> float:
    """``g_k h_k^H B_k^-1 h_k``, the optimum any combiner can reach for node ``k``."""
    _, b = instance.covariances(k)
    hk = instance.channels[:, k]
    return float(instance.gains()[k] * np.real(hk.conj() @ np.linalg.solve(b, hk)))


# --- lifted problem ----------------------------------------------------------

def relaxed_rate(w: np.ndarray, instance: BeamInstance, k: int) -> float:
    """Node ``k``'s rate as a function of the lifted matrix."""
    a, b = instance.covariances(k)
    return float(np.log2(np.vdot(a, w).real / np.vdot(b, w).real))


def relaxed_rates(mats, instance: BeamInstance) -> np.ndarray:
    return np.array([relaxed_rate(w, instance, k) for k, w in enumerate(mats)])


def _bound_one(w, w_l, a, b) -> float:
    a_l = np.vdot(b, w_l).real
    return float(np.log2(np.vdot(a, w).real) - np.log2(a_l)
                 - LOG2E * (np.vdot(b, w).real - a_l) / a_l)


def taylor_lower_bound(mats, mats_l, instance: BeamInstance) -> np.ndarray:
    """First-order lower bound of each node's rate, expanded at ``mats_l``.

    The interference-plus-noise log term is concave, so its tangent plane
    lies above it and the bound holds globally with equality at ``mats_l``.
    """
    if isinstance(mats, SdpIterate):
        mats = mats.mats
    if isinstance(mats_l, SdpIterate):
        mats_l = mats_l.mats
    out = []
    for k, (w, w_l) in enumerate(zip(mats, mats_l)):
        a, b = instance.covariances(k)
        out.append(_bound_one(w, w_l, a, b))
    return np.array(out)


def matched_filter_iterate(instance: BeamInstance, scaled: bool = True) -> SdpIterate:
    """Matched-filter starting matrices ``rho * h h^H / |h|^2``.

    ``scaled`` sets ``rho`` to the inverse condition number of ``B_k``. That
    keeps the trace cap slack in the first bound maximisation, which then
    lands on the ratio optimum directly; ``rho = 1`` lets the cap bind and
    the iterates only creep towards it.
    """
    mats = []
    for k in range(instance.n_nodes):
        h = instance.channels[:, k]
        rho = 1.0
        if scaled:
            ev = np.linalg.eigvalsh(instance.covariances(k)[1])
            rho = ev[0] / ev[-1]
        mats.append(rho * np.outer(h, h.conj()) / np.vdot(h, h).real)
    return SdpIterate(mats, 0)


def solve_sdr_subproblem(w_l: SdpIterate, instance: BeamInstance, tolerance: float = 1e-8,
                         solver: str = "barrier") -> SdpIterate:
    """Maximise the summed lower bound over trace-bounded PSD matrices.

    Nodes decouple (each bound depends on its own matrix only), so the joint
    problem is solved node by node. With a rate floor, a node whose best
    bound still falls short is flagged infeasible and keeps the floor-free
    optimum.
    """
    mats = []
    infeasible = np.zeros(instance.n_nodes, dtype=bool)
    for k, wk_l in enumerate(w_l.mats):
        a, b = instance.covariances(k)
        if instance.powers[k] == 0:
            mats.append(wk_l)  # rate is identically zero
            continue
        a_l = np.vdot(b, wk_l).real
        if solver == "barrier":
            res = maximize_log_linear(a, b / a_l, gap=tolerance)
        elif solver == "cvxpy":
            res = maximize_log_linear_cvxpy(a, b / a_l)
        else:
            raise ValueError(f"unknown solver {solver!r}")
        w = res.w
        # an inexact solve must not undo the ascent guarantee
        if _bound_one(w, wk_l, a, b) < _bound_one(wk_l, wk_l, a, b):
            w = wk_l
        mats.append(w)
        if instance.floors is not None:
            if _bound_one(w, wk_l, a, b) < instance.floors[k] - tolerance:
                infeasible[k] = True
    return SdpIterate(mats, w_l.index + 1, infeasible)


def rank_one_recover(w_star: np.ndarray, probe: np.ndarray, covariances=None) -> np.ndarray:
    """``w = (a^H W a)^-1/2 W a``; falls back to the dominant eigenvector as probe.

    With ``covariances=(A, B)`` the result is checked to keep ``tr(A W)`` and
    ``tr(B W)``, which is all the rate bound sees. The probe construction does
    that for rank-one and optimal matrices only; otherwise the vector is
    taken from ``purify`` instead.
    """
    w_star = np.asarray(w_star, dtype=complex)
    probe = np.asarray(probe, dtype=complex)
    q = np.real(probe.conj() @ w_star @ probe)
    if q <= 1e-12:
        vals, vecs = np.linalg.eigh(w_star)
        probe = vecs[:, -1]
        q = np.real(probe.conj() @ w_star @ probe)
        if q <= 1e-12:
            raise ValueError("cannot recover a combiner from a zero matrix")
    w = w_star @ probe / np.sqrt(q)
    if covariances is None:
        return w
    a, b = covariances
    if _traces_kept(w, w_star, a, b):
        return w
    return purify(w_star, a, b)


def _traces_kept(w, w_star, a, b, rtol=1e-10) -> bool:
    for c in (a, b):
        want = np.vdot(c, w_star).real
        if abs(np.real(w.conj() @ c @ w) - want) > rtol * abs(want):
            return False
    return True


def _two_vector_point(t, x, y, s):
    """Unit ``v`` in span{x, y} (orthonormal) with ``v^H T v = (1-s) x^H T x + s y^H T y``."""
    za = np.vdot(x, t @ x)
    zb = np.vdot(y, t @ y)
    d = zb - za
    if abs(d) <= 1e-300:
        return x
    u = np.conj(d)
    al = np.vdot(x, t @ y) * u
    be = np.vdot(y, t @ x) * u
    # pick the phase that puts the cross term on the line through za and zb
    phi = np.arctan2(-(al.imag + be.imag), al.real - be.real)
    g = np.exp(1j * phi) * np.vdot(x, t @ y) + np.exp(-1j * phi) * np.vdot(y, t @ x)
    lam = float(np.real(g * u) / abs(d) ** 2)
    c = 2 * s - 1
    r = np.hypot(1.0, lam)
    th = np.arctan2(1.0, lam) + np.arcsin(np.clip(c / r, -1.0, 1.0))
    return np.cos(th / 2) * x + np.exp(1j * phi) * np.sin(th / 2) * y


def purify(w_star: np.ndarray, a: np.ndarray, b: np.ndarray, rtol: float = 1e-12) -> np.ndarray:
    """Vector ``w`` in the range of ``W`` with ``w^H A w = tr(A W)``, ``w^H B w = tr(B W)``
    and ``|w|^2 = tr(W)``.

    With ``W = R R^H`` the shifted matrices ``C = tr(W) A - tr(A W) I`` (and
    likewise for ``B``) give a trace-zero ``T = R^H (C_a + i C_b) R``. Zero
    is then in the (convex) numerical range of ``T``; it is reached by
    merging basis vectors pairwise while keeping the running average.
    """
    w_star = np.asarray(w_star, dtype=complex)
    vals, vecs = np.linalg.eigh(w_star)
    keep = vals > rtol * max(vals[-1], 0.0)
    if vals[-1] <= 0:
        raise ValueError("cannot recover a combiner from a zero matrix")
    r_fac = vecs[:, keep] * np.sqrt(vals[keep])
    tr = float(np.sum(vals[keep]))
    m = len(w_star)
    ca = tr * a - np.vdot(a, w_star).real * np.eye(m)
    cb = tr * b - np.vdot(b, w_star).real * np.eye(m)
    t = r_fac.conj().T @ (ca + 1j * cb) @ r_fac
    r = t.shape[0]
    basis = np.eye(r, dtype=complex)
    v = basis[:, 0]
    for j in range(1, r):
        v = _two_vector_point(t, v, basis[:, j], 1.0 / (j + 1))
    w = r_fac @ v
    return w * np.sqrt(tr) / np.linalg.norm(w)


def rank_ratio(w: np.ndarray) -> float:
    vals = np.linalg.eigvalsh(w)
    return float(max(vals[-2], 0.0) / vals[-1]) if len(vals) > 1 else 0.0


def sca_optimize(instance: BeamInstance, max_iters: int = 20, epsilon: float = 1e-4,
                 solver: str = "barrier", tolerance: float = 1e-8,
                 scaled_init: bool = True) -> BeamformerSet:
    """Successive convex approximation over the relaxed problem.

    Starts from the matched-filter matrices, stops when the summed rate of the
    relaxed iterates gains less than ``epsilon`` or after ``max_iters`` solves.
    Rates returned are those of the recovered vectors, not of the relaxation.
    """
    it = matched_filter_iterate(instance, scaled_init)
    history = [float(relaxed_rates(it.mats, instance).sum())]
    bounds = []
    infeasible = np.zeros(instance.n_nodes, dtype=bool)
    for _ in range(max_iters):
        nxt = solve_sdr_subproblem(it, instance, tolerance, solver)
        bounds.append(float(taylor_lower_bound(nxt.mats, it.mats, instance).sum()))
        infeasible |= nxt.infeasible
        it = nxt
        history.append(float(relaxed_rates(it.mats, instance).sum()))
        if history[-1] - history[-2] < epsilon:
            break
    vectors = [rank_one_recover(w, instance.channels[:, k], instance.covariances(k))
               for k, w in enumerate(it.mats)]
    diag = {
        "method": "sca",
        "iterations": it.index,
        "objective_history": history,
        "bound_history": bounds,
        "final_objective": history[-1],
        "rank_ratio": [rank_ratio(w) for w in it.mats],
        "infeasible": infeasible.tolist(),
    }
    out = evaluate(instance, vectors, diag)
    out.diagnostics["relaxed_rates"] = relaxed_rates(it.mats, instance).tolist()
    return out


# --- codebooks ---------------------------------------------------------------

@dataclass(frozen=True)
class Codebook:
    words: np.ndarray  # (size, M)

    def __len__(self):
        return self.words.shape[0]

    def __getitem__(self, i):
        return self.words[i]


def build_dft_codebook(m: int, size: int) -> Codebook:
    if size < 1 or m < 1:
        raise ValueError("codebook needs m >= 1 and size >= 1")
    i = np.arange(size)[:, None]
    t = np.arange(m)[None, :]
    return Codebook(np.exp(2j * np.pi * i * t / size) / np.sqrt(m))


def codeword_sinrs(instance: BeamInstance, k: int, codebook: Codebook) -> np.ndarray:
    """SINR of node ``k`` for every codeword at once."""
    w = codebook.words
    g = np.abs(w.conj() @ instance.channels) ** 2  # (size, S)
    p = instance.powers
    sig = p[k] * g[:, k]
    interf = g @ p - sig
    return sig / (interf + instance.noise_power * np.sum(np.abs(w) ** 2, axis=1))


def best_codeword(instance: BeamInstance, k: int, codebook: Codebook) -> int:
    if len(codebook) == 0:
        raise ValueError("empty codebook")
    return int(np.argmax(codeword_sinrs(instance, k, codebook)))


def codebook_beamformers(instance: BeamInstance, codebook: Codebook, indices) -> BeamformerSet:
    vectors = [codebook[int(i)] for i in indices]
    return evaluate(instance, vectors, {"method": "codebook", "indices": [int(i) for i in indices]})


def solve_json(doc: dict, method: str = "sca", max_iters: int = 20, epsilon: float = 1e-4) -> dict:
    """Instance document in, beamformer document out (``beam solve``)."""
    inst = BeamInstance.from_json(doc)
    method = doc.get("method", method)
    if method == "sca":
        out = sca_optimize(inst, int(doc.get("max_iters", max_iters)),
                           float(doc.get("epsilon", epsilon)))
    elif method == "mmse":
        out = mmse_beamformers(inst)
    else:
        raise ValueError(f"unknown method {method!r}")
    return out.to_json()


def dumps(doc: dict) -> str:
    return json.dumps(doc, indent=2, sort_keys=True)
