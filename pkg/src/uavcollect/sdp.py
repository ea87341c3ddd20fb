"""Log-barrier interior-point method for a small Hermitian SDP.

Solves::

    maximize    ln tr(A W) - tr(C W)
    subject to  tr(W) <= 1,  W >= 0 (Hermitian PSD)

which is the per-node subproblem of the beamforming loop after the concave
part has been linearised. ``A`` must be PSD with ``tr(A W) > 0`` on the
interior of the feasible set.

The iterate is carried as a Cholesky factor ``W = L L^H`` and each Newton
step is computed in the frame scaled by ``L``, where the log-det Hessian is
the identity. The two rank-one Hessian terms (from ``tr(A W)`` and
``tr(W)``) then leave a 2x2 solve. The scaled frame keeps every quantity of
order one, which avoids the cancellation that otherwise stalls Newton once
``W`` is close to rank one.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class BarrierResult:
    w: np.ndarray
    value: float
    newton_steps: int
    gap: float
    converged: bool = True


def _inner(x: np.ndarray, y: np.ndarray) -> float:
    """Real inner product ``Re tr(X Y)`` of Hermitian matrices."""
    return np.vdot(x, y).real


def _herm(x: np.ndarray) -> np.ndarray:
    return 0.5 * (x + x.conj().T)


def maximize_log_linear(a: np.ndarray, c: np.ndarray, gap: float = 1e-8, mu: float = 100.0,
                        t0: float = 1.0, max_newton: int = 400,
                        newton_tol: float = 1e-10) -> BarrierResult:
    """Barrier method for ``max ln tr(AW) - tr(CW)`` over the trace-bounded PSD cone."""
    m = a.shape[0]
    a = _herm(np.asarray(a, dtype=complex))
    c = _herm(np.asarray(c, dtype=complex))
    eye = np.eye(m)
    nu = m + 1.0
    lf = eye.astype(complex) / np.sqrt(2.0 * m)  # W = I / 2m
    t = t0
    steps = 0
    centred = False

    while True:
        centred = False
        for _ in range(100):
            lh = lf.conj().T
            at = _herm(lh @ a @ lf)
            ct = _herm(lh @ c @ lf)
            et = _herm(lh @ lf)
            alpha = np.trace(at).real
            slack = 1.0 - np.trace(et).real
            g = t * (ct - at / alpha) - eye + et / slack
            u1 = t / alpha ** 2
            u2 = 1.0 / slack ** 2
            lhs = np.array([
                [1.0 + u1 * _inner(at, at), u2 * _inner(at, et)],
                [u1 * _inner(et, at), 1.0 + u2 * _inner(et, et)],
            ])
            rhs = -np.array([_inner(at, g), _inner(et, g)])
            p, q = np.linalg.solve(lhs, rhs)
            d = _herm(-g - u1 * p * at - u2 * q * et)
            decrement = -_inner(g, d)
            steps += 1
            if decrement / 2.0 <= newton_tol:
                centred = True
                break
            if steps >= max_newton:
                break
            lam = np.linalg.eigvalsh(d)[0]
            step = 1.0 if lam >= 0 else min(1.0, -0.99 / lam)
            tr_d = _inner(et, d)  # rate of change of tr(W)
            if tr_d > 0:
                step = min(step, 0.99 * slack / tr_d)
            a_lin = _inner(at, d)
            c_lin = _inner(ct, d)
            rf = None
            while step >= 1e-12:
                a_new = alpha + step * a_lin
                s_new = slack - step * tr_d
                if a_new > 0 and s_new > 0:
                    try:
                        rf = np.linalg.cholesky(eye + step * d)
                    except np.linalg.LinAlgError:
                        rf = None
                    if rf is not None:
                        df = (-t * (np.log(a_new / alpha) - step * c_lin)
                              - 2.0 * np.sum(np.log(np.diag(rf).real))
                              - np.log(s_new / slack))
                        if df <= -0.25 * step * decrement:
                            break
                        rf = None
                step *= 0.5
            if rf is None:
                # stalled at rounding level; the centre is as good as it gets
                centred = decrement < 1e-6
                break
            lf = lf @ rf
        if nu / t < gap or steps >= max_newton:
            break
        t *= mu
    w = _herm(lf @ lf.conj().T)
    value = float(np.log(_inner(a, w)) - _inner(c, w))
    return BarrierResult(w=w, value=value, newton_steps=steps, gap=nu / t,
                         converged=centred and nu / t < gap)


def maximize_log_linear_cvxpy(a: np.ndarray, c: np.ndarray, solvers=("CLARABEL", "SCS")):
    """Same problem through cvxpy; kept as an independent route for cross-checks.

    Solvers are tried in order until one returns a point.
    """
    import cvxpy as cp

    m = a.shape[0]
    w = cp.Variable((m, m), hermitian=True)
    obj = cp.log(cp.real(cp.trace(a @ w))) - cp.real(cp.trace(c @ w))
    prob = cp.Problem(cp.Maximize(obj), [w >> 0, cp.real(cp.trace(w)) <= 1])
    if isinstance(solvers, str):
        solvers = (solvers,)
    status = "not run"
    for solver in solvers:
        try:
            prob.solve(solver=solver)
        except cp.error.SolverError as exc:
            status = str(exc)
            continue
        if w.value is not None:
            return BarrierResult(w=_herm(w.value), value=float(prob.value), newton_steps=-1,
                                 gap=float("nan"))
        status = prob.status
    raise RuntimeError(f"cvxpy found no solution: {status}")
