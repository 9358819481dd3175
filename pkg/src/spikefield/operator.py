"""Discretized connectivity operator and spectral estimates.

T_W g(x) = integral of W(x, y) g(y) dy acts on L2 of the unit interval.
The midpoint rule at resolution m turns it into the m x m matrix
A[k, l] = W(u_k, u_l) / m over nodes u_k = (k + 1/2) / m.  Its Perron root
approximates the operator's spectral radius r_inf, which combined with the
kernel mass and the rate function's slope bound decides subcriticality.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .fields import GridField, midpoint_nodes


class IterationError(RuntimeError):
    """Power iteration or a fixed-point loop failed to settle."""

    def __init__(self, message, last_value=None):
        super().__init__(message)
        self.last_value = last_value


@dataclass
class GridOperator:
    kernel: object
    m: int
    matrix: np.ndarray

    @property
    def nodes(self) -> np.ndarray:
        return midpoint_nodes(self.m)


def build_operator(kernel, m: int = 512) -> GridOperator:
    if m < 1:
        raise ValueError("grid resolution must be positive")
    u = midpoint_nodes(m)
    mat = np.asarray(kernel(u[:, None], u[None, :]), dtype=float) / m
    return GridOperator(kernel=kernel, m=m, matrix=mat)


def apply_TW(op: GridOperator, g) -> np.ndarray:
    """Apply the discretized operator to a field or plain vector."""
    vec = g.values if isinstance(g, GridField) else np.asarray(g, dtype=float)
    if vec.size != op.m:
        raise ValueError(f"field has {vec.size} nodes, operator expects {op.m}")
    return op.matrix @ vec


@dataclass
class PowerResult:
    value: float
    vector: np.ndarray
    iterations: int


def power_iteration(matrix: np.ndarray, tol: float = 1e-10,
                    max_iter: int = 100_000) -> PowerResult:
    """Perron root of a nonnegative matrix, started from the constant vector.

    Stops when two successive Rayleigh quotients differ by less than tol.
    A vanishing iterate means the matrix annihilates the positive cone's
    interior, which for nonnegative matrices pins the spectral radius at 0.
    """
    m = matrix.shape[0]
    if matrix.shape != (m, m):
        raise ValueError("need a square matrix")
    if np.any(matrix < 0):
        raise ValueError("power iteration here assumes a nonnegative matrix")
    v = np.full(m, 1.0 / math.sqrt(m))
    est = 0.0
    for it in range(1, max_iter + 1):
        w = matrix @ v
        norm = float(np.linalg.norm(w))
        if norm == 0.0:
            return PowerResult(0.0, w, it)
        new_est = float(v @ w)  # Rayleigh quotient at the unit iterate
        v = w / norm
        if it > 1 and abs(new_est - est) < tol:
            return PowerResult(new_est, v, it)
        est = new_est
    raise IterationError(
        f"power iteration did not settle within {max_iter} steps", last_value=est)


def spectral_radius(op: GridOperator, tol: float = 1e-10,
                    max_iter: int = 100_000) -> float:
    return power_iteration(op.matrix, tol=tol, max_iter=max_iter).value


@dataclass
class StabilityReport:
    """Subcriticality summary for a (W, F, h) triple.

    product = dx_sup * l1_norm * r_inf must stay below 1; for an exponential
    kernel with decay alpha this is equivalent to the positivity of
    gamma = alpha - r_inf * dx_sup, the decay margin of the linearized flow.
    """

    r_inf: float
    dx_sup: float
    l1_norm: float
    product: float
    subcritical: bool
    gamma: float | None = None
    alpha: float | None = None

    def as_dict(self) -> dict:
        return {"r_inf": self.r_inf, "product": self.product,
                "gamma": self.gamma, "subcritical": self.subcritical,
                "dx_sup": self.dx_sup, "l1_norm": self.l1_norm,
                "alpha": self.alpha}

    def to_json(self) -> str:
        return json.dumps(self.as_dict(), indent=2)


def stability_report(op: GridOperator, F, h, tol: float = 1e-10) -> StabilityReport:
    r = spectral_radius(op, tol=tol)
    l1 = h.l1_norm
    product = F.dx_sup * l1 * r
    alpha = getattr(h, "alpha", None)
    gamma = None if alpha is None else alpha - r * F.dx_sup
    return StabilityReport(r_inf=r, dx_sup=F.dx_sup, l1_norm=l1,
                           product=product, subcritical=product < 1.0,
                           gamma=gamma, alpha=alpha)


def linearized_semigroup_decay(op: GridOperator, F, x_inf: GridField,
                               drive, alpha: float, y0, t_end: float,
                               dt: float = 1e-3, n_save: int = 200):
    """Evolve the linearization dY/dt = -alpha Y + T_W (G Y) and record norms.

    G is the x-derivative of the rate function along the stationary profile.
    Returns (times, l2_norms) on a save lattice of n_save points; classic
    fourth-order Runge-Kutta with fixed step dt does the integration.
    """
    if isinstance(y0, GridField):
        y = y0.values.copy()
    else:
        y = np.asarray(y0, dtype=float).copy()
    if y.size != op.m:
        raise ValueError("initial perturbation must live on the operator grid")
    eta_inf = np.asarray(drive.asymptotic(op.nodes), dtype=float)
    gain = np.asarray(F.dx(x_inf.values, eta_inf), dtype=float)
    mat = op.matrix

    def rhs(v):
        return -alpha * v + mat @ (gain * v)

    n_steps = max(1, int(math.ceil(t_end / dt)))
    dt = t_end / n_steps
    save_every = max(1, n_steps // n_save)
    times = [0.0]
    norms = [float(np.sqrt(np.mean(y ** 2)))]
    t = 0.0
    for k in range(1, n_steps + 1):
        k1 = rhs(y)
        k2 = rhs(y + 0.5 * dt * k1)
        k3 = rhs(y + 0.5 * dt * k2)
        k4 = rhs(y + dt * k3)
        y = y + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        t = k * dt
        if k % save_every == 0 or k == n_steps:
            times.append(t)
            norms.append(float(np.sqrt(np.mean(y ** 2))))
    return np.asarray(times), np.asarray(norms)
