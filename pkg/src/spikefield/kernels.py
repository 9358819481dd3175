"""Model ingredients for spiking networks on [0, 1].

Four families of objects parameterize a network model:

* memory kernels ``h`` weighting the influence of past spikes,
* rate functions ``F(x, eta)`` mapping synaptic current and drive to a
  firing intensity,
* connectivity kernels ``W(x, y)`` giving the edge probability profile
  between positions on the unit interval (first argument is the target,
  second the source),
* an exogenous drive ``eta_t(x)`` relaxing from a start profile to an
  asymptotic one.

All evaluators accept scalars or numpy arrays and broadcast.
"""
from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

# Fixed evaluation grid used for sup/min estimates of profiles on [0, 1].
_SUP_GRID = np.linspace(0.0, 1.0, 10_001)


class KernelError(ValueError):
    """Raised when a kernel parameterization violates its constraints."""


def _check_time(t: np.ndarray) -> None:
    if np.any(t < 0):
        raise KernelError("memory kernels are causal: t must be >= 0")


def _check_positions(*arrays) -> None:
    for a in arrays:
        if a.size and (a.min() < 0.0 or a.max() > 1.0):
            raise KernelError("positions must lie in [0, 1]")


# ---------------------------------------------------------------------------
# scalar profiles on [0, 1]


class Profile:
    """A nonnegative function on [0, 1]: constant, polynomial, or tabulated.

    Polynomials store ascending coefficients ``c[0] + c[1] x + ...``.
    Tabulated profiles interpolate linearly between uniform grid samples.
    """

    def __init__(self, kind: str, data: np.ndarray, xs: np.ndarray | None = None):
        self.kind = kind
        self.data = np.asarray(data, dtype=float)
        self.xs = None if xs is None else np.asarray(xs, dtype=float)
        vals = self(_SUP_GRID)
        self.sup = float(np.max(vals))
        self.inf = float(np.min(vals))

    @classmethod
    def constant(cls, value: float) -> "Profile":
        return cls("constant", np.array([float(value)]))

    @classmethod
    def polynomial(cls, coeffs) -> "Profile":
        return cls("polynomial", np.asarray(coeffs, dtype=float))

    @classmethod
    def tabulated(cls, xs, values) -> "Profile":
        xs = np.asarray(xs, dtype=float)
        values = np.asarray(values, dtype=float)
        if xs.ndim != 1 or xs.shape != values.shape or xs.size < 2:
            raise KernelError("tabulated profile needs matching 1-d grids with >= 2 points")
        if np.any(np.diff(xs) <= 0):
            raise KernelError("tabulated profile grid must be strictly increasing")
        return cls("tabulated", values, xs=xs)

    @classmethod
    def from_csv(cls, path) -> "Profile":
        xs, vals = _read_two_column_csv(path)
        return cls.tabulated(xs, vals)

    @classmethod
    def coerce(cls, value) -> "Profile":
        """Accept a Profile, a scalar, or a coefficient list."""
        if isinstance(value, Profile):
            return value
        if np.isscalar(value):
            return cls.constant(float(value))
        return cls.polynomial(value)

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        if self.kind == "constant":
            out = np.full_like(x, self.data[0])
        elif self.kind == "polynomial":
            out = np.polynomial.polynomial.polyval(x, self.data)
        else:
            out = np.interp(x, self.xs, self.data)
        return out if out.ndim else float(out)

    def __repr__(self):
        if self.kind == "constant":
            return f"Profile.constant({self.data[0]!r})"
        if self.kind == "polynomial":
            return f"Profile.polynomial({self.data.tolist()!r})"
        return f"Profile.tabulated(<{self.data.size} samples>)"


def _read_two_column_csv(path):
    xs, vals = [], []
    with open(path, newline="") as fh:
        for row in csv.reader(fh):
            if not row or row[0].strip().startswith("#"):
                continue
            try:
                a, b = float(row[0]), float(row[1])
            except ValueError:
                continue  # header row
            xs.append(a)
            vals.append(b)
    if len(xs) < 2:
        raise KernelError(f"no data rows in {path}")
    return np.asarray(xs), np.asarray(vals)


# ---------------------------------------------------------------------------
# memory kernels


@dataclass(frozen=True)
class ExponentialMemory:
    """h(t) = exp(-alpha t); evaluation is restricted to t >= 0."""

    alpha: float

    def __post_init__(self):
        if not self.alpha > 0:
            raise KernelError("alpha must be positive")

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        _check_time(t)
        out = np.exp(-self.alpha * t)
        return out if out.ndim else float(out)

    @property
    def l1_norm(self) -> float:
        return 1.0 / self.alpha

    @property
    def sup(self) -> float:
        return 1.0

    @property
    def nonincreasing(self) -> bool:
        return True


class TabulatedMemory:
    """Memory kernel stored as samples on a uniform grid ``0, step, 2 step, ...``.

    Evaluation interpolates linearly and is zero beyond the last sample.
    The L1 norm is the trapezoid integral of the samples.
    """

    def __init__(self, samples, step: float):
        samples = np.asarray(samples, dtype=float)
        if samples.ndim != 1 or samples.size < 2:
            raise KernelError("need a 1-d array of >= 2 samples")
        if not step > 0:
            raise KernelError("step must be positive")
        if np.any(samples < 0):
            raise KernelError("memory kernel samples must be nonnegative")
        self.samples = samples
        self.step = float(step)
        self.t_max = self.step * (samples.size - 1)

    @classmethod
    def from_function(cls, fn, step: float, t_max: float) -> "TabulatedMemory":
        n = int(round(t_max / step)) + 1
        ts = np.arange(n) * step
        return cls(fn(ts), step)

    @classmethod
    def from_csv(cls, path) -> "TabulatedMemory":
        ts, vals = _read_two_column_csv(path)
        steps = np.diff(ts)
        if not np.allclose(steps, steps[0], rtol=1e-8, atol=1e-12):
            raise KernelError("memory kernel CSV must use a uniform time grid")
        if abs(ts[0]) > 1e-12:
            raise KernelError("memory kernel grid must start at t = 0")
        return cls(vals, float(steps[0]))

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        _check_time(t)
        out = np.interp(t, self.step * np.arange(self.samples.size), self.samples,
                        right=0.0)
        return out if out.ndim else float(out)

    @property
    def l1_norm(self) -> float:
        return float(np.trapezoid(self.samples, dx=self.step))

    @property
    def sup(self) -> float:
        return float(self.samples.max())

    @property
    def nonincreasing(self) -> bool:
        return bool(np.all(np.diff(self.samples) <= 1e-15))

    def __repr__(self):
        return f"TabulatedMemory(<{self.samples.size} samples>, step={self.step})"


# ---------------------------------------------------------------------------
# rate functions


@dataclass(frozen=True)
class LinearRate:
    """F(x, eta) = mu + eta + x.

    The baseline ``mu`` and the drive both shift the rate additively; the
    current enters with unit gain, so the x-derivative bound is 1.
    """

    mu: float = 0.0

    def __post_init__(self):
        if self.mu < 0:
            raise KernelError("baseline must be nonnegative")

    def __call__(self, x, eta):
        return self.mu + eta + x

    def dx(self, x, eta):
        return np.ones_like(np.asarray(x, dtype=float)) if np.ndim(x) else 1.0

    @property
    def dx_sup(self) -> float:
        return 1.0

    @property
    def lip(self) -> float:
        return 1.0


@dataclass(frozen=True)
class SigmoidRate:
    """F(x, eta) = lam_max / (1 + exp(-slope (x + eta - theta)))."""

    lam_max: float
    slope: float
    theta: float

    def __post_init__(self):
        if not (self.lam_max > 0 and self.slope > 0):
            raise KernelError("lam_max and slope must be positive")

    def __call__(self, x, eta):
        z = np.asarray(x, dtype=float) + eta - self.theta
        out = self.lam_max / (1.0 + np.exp(-self.slope * z))
        return out if np.ndim(out) else float(out)

    def dx(self, x, eta):
        s = self(x, eta) / self.lam_max
        return self.lam_max * self.slope * s * (1.0 - s)

    @property
    def dx_sup(self) -> float:
        # logistic derivative peaks at 1/4 of its plateau times the gain
        return self.lam_max * self.slope / 4.0

    @property
    def lip(self) -> float:
        return self.dx_sup


@dataclass(frozen=True)
class ConstantRate:
    """F(x, eta) = c: spikes arrive as independent Poisson streams."""

    c: float

    def __post_init__(self):
        if self.c < 0:
            raise KernelError("rate must be nonnegative")

    def __call__(self, x, eta):
        x = np.asarray(x, dtype=float)
        out = np.full_like(x, self.c)
        return out if out.ndim else float(out)

    def dx(self, x, eta):
        x = np.asarray(x, dtype=float)
        out = np.zeros_like(x)
        return out if out.ndim else 0.0

    @property
    def dx_sup(self) -> float:
        return 0.0

    @property
    def lip(self) -> float:
        return 0.0


# ---------------------------------------------------------------------------
# connectivity kernels


@dataclass(frozen=True)
class ConstantGraphon:
    """W(x, y) = c."""

    c: float

    def __post_init__(self):
        if not 0.0 <= self.c <= 1.0:
            raise KernelError("constant connectivity must lie in [0, 1]")

    def __call__(self, x, y):
        x, y = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(y, dtype=float))
        _check_positions(x, y)
        out = np.full(x.shape, self.c)
        return out if out.ndim else float(out)

    @property
    def sup(self) -> float:
        return self.c


@dataclass(frozen=True)
class ExpDistanceGraphon:
    """W(x, y) = min(1, exp(-|x - y| / sigma) / (2 sigma)).

    For sigma < 1/2 the unclipped peak exceeds 1; the value is clamped and
    a warning is emitted at construction.
    """

    sigma: float

    def __post_init__(self):
        if not self.sigma > 0:
            raise KernelError("sigma must be positive")
        if 1.0 / (2.0 * self.sigma) > 1.0:
            warnings.warn(
                f"distance kernel with sigma={self.sigma} is clipped to 1 near the diagonal",
                stacklevel=3,
            )

    def __call__(self, x, y):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        _check_positions(x, y)
        d = np.abs(x - y)
        out = np.minimum(1.0, np.exp(-d / self.sigma) / (2.0 * self.sigma))
        return out if np.ndim(out) else float(out)

    @property
    def sup(self) -> float:
        return min(1.0, 1.0 / (2.0 * self.sigma))


class ProductGraphon:
    """Separable connectivity W(x, y) = f(x) g(y).

    ``f`` shapes the in-degree profile (target side), ``g`` the out-degree
    profile (source side).  The product may exceed 1 for analysis purposes
    (spectral radius, quadrature diagnostics); such kernels are flagged and
    refused by graph sampling, which needs Bernoulli probabilities.
    """

    def __init__(self, f, g):
        self.f = Profile.coerce(f)
        self.g = Profile.coerce(g)
        if self.f.inf < 0 or self.g.inf < 0:
            raise KernelError("profiles of a product kernel must be nonnegative")
        self.sup = self.f.sup * self.g.sup
        self.bernoulli_compatible = self.sup <= 1.0 + 1e-12

    def __call__(self, x, y):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        _check_positions(x, y)
        out = np.asarray(self.f(x)) * np.asarray(self.g(y))
        return out if np.ndim(out) else float(out)

    def __repr__(self):
        return f"ProductGraphon({self.f!r}, {self.g!r})"


@dataclass(frozen=True)
class PNearestGraphon:
    """W(x, y) = 1 when the circle distance between x and y is < r, else 0."""

    r: float

    def __post_init__(self):
        if not 0.0 < self.r < 0.5:
            raise KernelError("radius must lie in (0, 1/2)")

    def __call__(self, x, y):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        _check_positions(x, y)
        d = np.abs(x - y)
        circ = np.minimum(d, 1.0 - d)
        out = np.where(circ < self.r, 1.0, 0.0)
        return out if out.ndim else float(out)

    @property
    def sup(self) -> float:
        return 1.0


class BlockGraphon:
    """Piecewise-constant connectivity over blocks of [0, 1].

    ``boundaries`` are the interior cut points ``0 < b_1 < ... < b_{p-1} < 1``
    and ``p`` is the p x p matrix of probabilities, row = target block,
    column = source block.  Points fall in block k when
    ``b_k <= x < b_{k+1}`` (the last block includes 1).
    """

    def __init__(self, boundaries, p):
        cuts = np.asarray(boundaries, dtype=float)
        p = np.asarray(p, dtype=float)
        if cuts.ndim != 1 or np.any(np.diff(cuts) <= 0):
            raise KernelError("block boundaries must be strictly increasing")
        if cuts.size and not (cuts[0] > 0 and cuts[-1] < 1):
            raise KernelError("block boundaries must lie strictly inside (0, 1)")
        k = cuts.size + 1
        if p.shape != (k, k):
            raise KernelError(f"probability matrix must be {k} x {k} for {k} blocks")
        if np.any(p < 0) or np.any(p > 1):
            raise KernelError("block probabilities must lie in [0, 1]")
        self.cuts = cuts
        self.p = p
        self.edges = np.concatenate([[0.0], cuts, [1.0]])

    def block_of(self, x):
        idx = np.searchsorted(self.cuts, np.asarray(x, dtype=float), side="right")
        return idx

    def block_lengths(self) -> np.ndarray:
        return np.diff(self.edges)

    def __call__(self, x, y):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        _check_positions(x, y)
        out = self.p[self.block_of(x), self.block_of(y)]
        return out if np.ndim(out) else float(out)

    @property
    def sup(self) -> float:
        return float(self.p.max())

    def __repr__(self):
        return f"BlockGraphon(cuts={self.cuts.tolist()}, p={self.p.tolist()})"


def graphon_sup(kernel) -> float:
    """Upper bound for a connectivity kernel, used to validate sampling."""
    return float(kernel.sup)


# ---------------------------------------------------------------------------
# exogenous drive


class RelaxationDrive:
    """eta_t(x) = eta_inf(x) + exp(-beta t) (eta_0(x) - eta_inf(x)).

    beta = 0 or eta_0 = eta_inf gives a constant-in-time drive.  delta(t)
    bounds the uniform distance to the asymptotic profile and decays at
    rate beta; the sup is taken over a fixed dense grid on [0, 1].
    """

    def __init__(self, eta_inf=0.0, eta_0=None, beta: float = 0.0):
        if beta < 0:
            raise KernelError("relaxation rate must be nonnegative")
        self.eta_inf = Profile.coerce(eta_inf)
        self.eta_0 = self.eta_inf if eta_0 is None else Profile.coerce(eta_0)
        self.beta = float(beta)
        if self.eta_inf.inf < -1e-12 or self.eta_0.inf < -1e-12:
            raise KernelError("drive profiles must be nonnegative")
        diff = self.eta_0(_SUP_GRID) - self.eta_inf(_SUP_GRID)
        self.delta_0 = float(np.max(np.abs(diff)))
        self._diff_min = float(np.min(diff))

    @property
    def stationary(self) -> bool:
        return self.beta == 0.0 or self.delta_0 == 0.0

    @property
    def nonincreasing(self) -> bool:
        """True when the drive never rises: each site decays toward eta_inf."""
        return self.stationary or self._diff_min >= -1e-12

    def __call__(self, t, x):
        base = self.eta_inf(x)
        if self.delta_0 == 0.0:
            return base
        fade = np.exp(-self.beta * np.asarray(t, dtype=float))
        out = base + fade * (self.eta_0(x) - self.eta_inf(x))
        return out if np.ndim(out) else float(out)

    def delta(self, t) -> float:
        """Uniform bound on |eta_t - eta_inf| at time t."""
        if self.delta_0 == 0.0:
            return 0.0
        return float(self.delta_0 * math.exp(-self.beta * float(t)))

    def asymptotic(self, x):
        """Large-time drive profile: eta_inf, or eta_0 when beta = 0 freezes
        the drive at its start profile."""
        if self.beta == 0.0:
            return self.eta_0(x)
        return self.eta_inf(x)

    def __repr__(self):
        return (f"RelaxationDrive(eta_inf={self.eta_inf!r}, eta_0={self.eta_0!r}, "
                f"beta={self.beta})")


def constant_drive(value: float) -> RelaxationDrive:
    return RelaxationDrive(eta_inf=float(value))
