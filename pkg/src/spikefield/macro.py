"""Large-population limit dynamics on the discretization grid.

Two routes to the limiting intensity profile are implemented and kept
deliberately independent so they can cross-check each other:

* for an exponential memory kernel, the current profile solves the field ODE
  dX/dt = -alpha X + T_W F(X, eta_t), integrated with Runge-Kutta 4;
* for a general kernel, the intensity solves the convolution equation
  lambda_t = F(T_W integral of h(t - s) lambda_s ds, eta_t), discretized
  with a trapezoid history sum.

Stationary profiles come from Picard iteration on the intensity:
ell = F(l1(h) T_W ell, eta_asymptotic), and X_inf = l1(h) T_W ell.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .fields import GridField, GridTrajectory
from .operator import GridOperator, IterationError, StabilityReport, stability_report


class BlowUpError(RuntimeError):
    """A macroscopic solve left the bounded regime (supercritical growth)."""

    def __init__(self, t, norm):
        super().__init__(f"field norm {norm:.3e} exceeded the blow-up guard at t={t:.3f}")
        self.t = t
        self.norm = norm


@dataclass
class FixedPointResult:
    ell: GridField          # stationary intensity profile
    x_inf: GridField        # stationary current profile
    iterations: int
    residual: float         # sup norm of the defining equation's mismatch
    report: StabilityReport
    ratios: np.ndarray      # successive Picard contraction ratios

    def subcritical(self) -> bool:
        return self.report.subcritical


def fixed_point(op: GridOperator, F, h, drive, tol: float = 1e-12,
                max_iter: int = 100_000) -> FixedPointResult:
    """Stationary intensity and current profiles by Picard iteration.

    Subcriticality is checked first; iteration proceeds either way but a
    supercritical parameterization is expected to exhaust max_iter.
    """
    report = stability_report(op, F, h)
    l1 = h.l1_norm
    eta = np.asarray(drive.asymptotic(op.nodes), dtype=float)
    ell = np.asarray(F(np.zeros(op.m), eta), dtype=float)
    ratios = []
    prev_step = None
    for it in range(1, max_iter + 1):
        nxt = np.asarray(F(l1 * (op.matrix @ ell), eta), dtype=float)
        step = float(np.max(np.abs(nxt - ell)))
        if prev_step is not None and prev_step > 0:
            ratios.append(step / prev_step)
        prev_step = step
        ell = nxt
        if step < tol:
            x_inf = l1 * (op.matrix @ ell)
            resid = float(np.max(np.abs(
                x_inf - l1 * (op.matrix @ np.asarray(F(x_inf, eta), dtype=float)))))
            return FixedPointResult(ell=GridField(ell), x_inf=GridField(x_inf),
                                    iterations=it, residual=resid, report=report,
                                    ratios=np.asarray(ratios))
    raise IterationError(
        f"fixed-point iteration did not reach tol={tol} in {max_iter} steps "
        f"(subcritical={report.subcritical})", last_value=ell)


def solve_nfe_exponential(op: GridOperator, F, alpha: float, drive,
                          x0=None, t_end: float = 10.0, dt: float | None = None,
                          n_save: int = 400, blow_cap: float = 1e9) -> GridTrajectory:
    """Integrate the exponential-memory field ODE from profile x0.

    dt defaults to 1e-3 / alpha.  Growth beyond blow_cap in sup norm aborts
    with BlowUpError carrying the escape time.
    """
    if dt is None:
        dt = 1e-3 / alpha
    x = np.zeros(op.m) if x0 is None else _as_values(x0, op.m)
    nodes = op.nodes
    mat = op.matrix
    n_steps = max(1, int(math.ceil(t_end / dt)))
    dt = t_end / n_steps
    save_every = max(1, n_steps // n_save)

    def rhs(v, t):
        eta = np.asarray(drive(t, nodes), dtype=float)
        return -alpha * v + mat @ np.asarray(F(v, eta), dtype=float)

    times = [0.0]
    rows = [x.copy()]
    for k in range(1, n_steps + 1):
        t = (k - 1) * dt
        k1 = rhs(x, t)
        k2 = rhs(x + 0.5 * dt * k1, t + 0.5 * dt)
        k3 = rhs(x + 0.5 * dt * k2, t + 0.5 * dt)
        k4 = rhs(x + dt * k3, t + dt)
        x = x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if not np.all(np.isfinite(x)) or np.max(np.abs(x)) > blow_cap:
            raise BlowUpError(k * dt, float(np.max(np.abs(x))))
        if k % save_every == 0 or k == n_steps:
            times.append(k * dt)
            rows.append(x.copy())
    return GridTrajectory(np.asarray(times), np.asarray(rows))


def solve_lambda_volterra(op: GridOperator, F, h, drive, t_end: float,
                          dt: float, blow_cap: float = 1e12) -> GridTrajectory:
    """Intensity profile from the convolution equation on a uniform lattice.

    Explicit history scheme: at step k the current is the trapezoid sum of
    h(t_k - t_j) lambda_j over past steps j < k, pushed through the operator
    and the rate function.  First-order accurate in dt; intended for
    validation-scale horizons.
    """
    n_steps = int(math.ceil(t_end / dt))
    dt = t_end / n_steps
    nodes = op.nodes
    mat = op.matrix
    times = np.arange(n_steps + 1) * dt
    hvals = np.asarray(h(times), dtype=float)          # h on the lattice
    lam = np.empty((n_steps + 1, op.m))
    lam[0] = np.asarray(F(np.zeros(op.m), np.asarray(drive(0.0, nodes), dtype=float)),
                        dtype=float)
    # trapezoid weights over the past lattice 0..k-1
    for k in range(1, n_steps + 1):
        w = np.full(k, dt)
        w[0] *= 0.5
        w[-1] *= 0.5 if k > 1 else 1.0
        conv = (w * hvals[k:0:-1]) @ lam[:k]           # h(t_k - t_j) lambda_j
        eta = np.asarray(drive(times[k], nodes), dtype=float)
        lam[k] = np.asarray(F(mat @ conv, eta), dtype=float)
        if not np.all(np.isfinite(lam[k])) or np.max(lam[k]) > blow_cap:
            raise BlowUpError(times[k], float(np.max(lam[k])))
    return GridTrajectory(times, lam)


def time_to_neighborhood(traj: GridTrajectory, target: GridField, eps: float) -> float:
    """First sample time after which the trajectory stays eps/4-close.

    Returns the earliest lattice time t with every later sampled distance
    (itself included) at or below eps/4.  Raises if the window never closes.
    """
    dist = traj.dist_l2(target)
    thresh = eps / 4.0
    ok = dist <= thresh
    # last index that violates the threshold decides the entry point
    bad = np.flatnonzero(~ok)
    if bad.size == 0:
        return float(traj.times[0])
    k = bad[-1] + 1
    if k >= dist.size:
        raise IterationError(
            f"trajectory never settles inside eps/4={thresh:.4g} "
            f"(final distance {dist[-1]:.4g})", last_value=dist[-1])
    return float(traj.times[k])


def _as_values(x0, m: int) -> np.ndarray:
    v = x0.values if isinstance(x0, GridField) else np.asarray(x0, dtype=float)
    if v.ndim == 0:
        return np.full(m, float(v))
    if v.size != m:
        raise ValueError(f"initial profile has {v.size} nodes, expected {m}")
    return v.astype(float).copy()
