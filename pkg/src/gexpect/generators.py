"""Driver functions of quadratic growth and their convex-duality toolkit.

A generator is a deterministic function g(t, z) with g(t, 0) = 0 and growth
|g(t, z)| <= mu*|z| + nu*|z|^2.  Built-in families cover the upper and lower
growth envelopes, the purely quadratic (entropic) driver, sublinear drivers
given by a sup over an interval of slopes, and the scaled absolute value.

Structural facts that the risk layer relies on (convexity, sublinearity,
one-sided domination) travel as flags; :func:`verify_class` re-checks them
numerically on grids and reports witnesses for violations.  The
Legendre-Fenchel conjugate and the subdifferential come in closed form for
the built-ins and via guarded grid refinement otherwise.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

CONVEX = "convex"
SUBLINEAR = "sublinear"
DOMINATED = "dominated"  # one-sided domination with parameter theta in (0, 1)

_GROWTH_TOL = 1e-9


@dataclass(frozen=True)
class Generator:
    """Deterministic driver g(t, z), vectorized in z.

    ``mu`` and ``nu`` are the growth constants; ``flags`` carry structural
    properties the constructor is willing to assert.  ``conjugate_fn`` and
    ``subdiff_fn`` are optional closed forms (vectorized in their second
    argument); when absent the numeric fallbacks are used.
    """

    fn: Callable[[float, np.ndarray], np.ndarray]
    mu: float
    nu: float
    flags: frozenset = frozenset()
    kind: str = "custom"
    params: dict = field(default_factory=dict)
    conjugate_fn: Callable[[float, np.ndarray], np.ndarray] | None = None
    subdiff_fn: Callable[[float, np.ndarray], tuple[np.ndarray, np.ndarray]] | None = None

    def __post_init__(self):
        if self.mu < 0 or self.nu < 0:
            raise ValueError("growth constants must be nonnegative")
        for t in (0.0, 0.5, 1.0):
            v = float(self.fn(t, np.zeros(1))[0])
            if abs(v) > _GROWTH_TOL:
                raise ValueError(f"generator must vanish at z=0; got g({t}, 0) = {v}")

    def __call__(self, t: float, z) -> np.ndarray:
        return np.asarray(self.fn(t, np.asarray(z, dtype=float)), dtype=float)

    def scalar(self, t: float, z: float) -> float:
        return float(self.fn(t, np.asarray([z], dtype=float))[0])

    def is_(self, flag: str) -> bool:
        return flag in self.flags


@dataclass(frozen=True)
class ConjugatePoint:
    """One evaluation of the conjugate f(t, x) = sup_z (x z - g(t, z)).

    ``value`` may be ``math.inf`` (coherent drivers are degenerate: zero on
    the slope interval, infinite outside).  ``argmax`` is None when the sup
    is infinite; ``tol`` bounds the grid error of a numeric evaluation and
    is 0 for closed forms.
    """

    x: float
    value: float
    argmax: float | None
    tol: float


def quadratic_upper(mu: float, nu: float) -> Generator:
    """g(z) = mu*|z| + nu*z^2, the upper growth envelope (convex)."""
    mu, nu = float(mu), float(nu)

    def fn(t, z):
        return mu * np.abs(z) + nu * z * z

    def conj(t, x):
        x = np.asarray(x, dtype=float)
        if nu == 0.0:
            return np.where(np.abs(x) <= mu + _GROWTH_TOL, 0.0, np.inf)
        excess = np.maximum(np.abs(x) - mu, 0.0)
        return excess * excess / (4.0 * nu)

    def subdiff(t, z):
        z = np.asarray(z, dtype=float)
        lo = np.where(z < 0, -mu + 2 * nu * z, np.where(z > 0, mu + 2 * nu * z, -mu))
        hi = np.where(z < 0, -mu + 2 * nu * z, np.where(z > 0, mu + 2 * nu * z, mu))
        return lo, hi

    flags = {CONVEX, DOMINATED}
    if nu == 0.0:
        flags.add(SUBLINEAR)
    return Generator(fn, mu, nu, frozenset(flags), "quadratic_upper",
                     {"mu": mu, "nu": nu}, conj, subdiff)


def quadratic_lower(mu: float, nu: float) -> Generator:
    """g(z) = -mu*|z| - nu*z^2, the lower growth envelope (concave)."""
    mu, nu = float(mu), float(nu)

    def fn(t, z):
        return -(mu * np.abs(z) + nu * z * z)

    def conj(t, x):
        # sup_z x z + mu|z| + nu z^2 diverges unless the driver vanishes.
        x = np.asarray(x, dtype=float)
        if mu == 0.0 and nu == 0.0:
            return np.where(np.abs(x) <= _GROWTH_TOL, 0.0, np.inf)
        return np.full_like(x, np.inf)

    return Generator(fn, mu, nu, frozenset({DOMINATED}), "quadratic_lower",
                     {"mu": mu, "nu": nu}, conj, None)


def entropy(nu: float) -> Generator:
    """g(z) = nu*z^2, the driver of the entropic risk measure."""
    nu = float(nu)
    if nu <= 0:
        raise ValueError("the entropic driver needs nu > 0")

    def fn(t, z):
        return nu * z * z

    def conj(t, x):
        x = np.asarray(x, dtype=float)
        return x * x / (4.0 * nu)

    def subdiff(t, z):
        z = np.asarray(z, dtype=float)
        s = 2.0 * nu * z
        return s, s.copy()

    return Generator(fn, 0.0, nu, frozenset({CONVEX, DOMINATED}), "entropy",
                     {"nu": nu}, conj, subdiff)


def sublinear_interval(lo: float, hi: float) -> Generator:
    """g(z) = sup over slopes q in [lo, hi] of q*z (coherent driver)."""
    lo, hi = float(lo), float(hi)
    if lo > hi:
        raise ValueError(f"empty slope interval [{lo}, {hi}]")
    mu = max(abs(lo), abs(hi))

    def fn(t, z):
        return np.maximum(lo * z, hi * z)

    def conj(t, x):
        x = np.asarray(x, dtype=float)
        inside = (x >= lo - _GROWTH_TOL) & (x <= hi + _GROWTH_TOL)
        return np.where(inside, 0.0, np.inf)

    def subdiff(t, z):
        z = np.asarray(z, dtype=float)
        l = np.where(z < 0, lo, np.where(z > 0, hi, lo))
        h = np.where(z < 0, lo, np.where(z > 0, hi, hi))
        return l, h

    return Generator(fn, mu, 0.0, frozenset({CONVEX, SUBLINEAR, DOMINATED}),
                     "sublinear_interval", {"lo": lo, "hi": hi}, conj, subdiff)


def scaled_abs(mu: float) -> Generator:
    """g(z) = mu*|z|, the symmetric sublinear driver."""
    g = sublinear_interval(-float(mu), float(mu))
    return Generator(g.fn, g.mu, 0.0, g.flags, "scaled_abs", {"mu": float(mu)},
                     g.conjugate_fn, g.subdiff_fn)


_BUILTINS = {
    "quadratic_upper": lambda p: quadratic_upper(p["mu"], p["nu"]),
    "quadratic_lower": lambda p: quadratic_lower(p["mu"], p["nu"]),
    "entropy": lambda p: entropy(p["nu"]),
    "sublinear_interval": lambda p: sublinear_interval(p["lo"], p["hi"]),
    "scaled_abs": lambda p: scaled_abs(p["mu"]),
}


def make_builtin(kind: str, **params) -> Generator:
    """Construct a built-in driver by name; see module docstring for the menu."""
    if kind not in _BUILTINS:
        raise ValueError(f"unknown generator kind {kind!r}; known: {sorted(_BUILTINS)}")
    try:
        return _BUILTINS[kind](params)
    except KeyError as exc:
        raise ValueError(f"missing parameter {exc} for generator {kind!r}") from None


# ---------------------------------------------------------------------------
# Legendre-Fenchel conjugate


_PASSES = 3
_GRID_POINTS = 1025  # odd, so the window center (and incumbent) is a grid point
_ZOOM = 16.0


def conjugate(g: Generator, t: float, x: float, force_numeric: bool = False) -> ConjugatePoint:
    """Pointwise conjugate f(t, x) = sup_z (x z - g(t, z)).

    Closed forms attached to the generator are used unless ``force_numeric``
    is set.  The numeric path runs three grid refinement passes, each
    zooming by a factor 16 around the incumbent argmax; infinite values are
    returned explicitly (never as a large sentinel).
    """
    x = float(x)
    if g.conjugate_fn is not None and not force_numeric:
        val = float(np.asarray(g.conjugate_fn(t, np.asarray([x]))).ravel()[0])
        return ConjugatePoint(x, val, _analytic_argmax(g, t, x, val), 0.0)
    if g.nu == 0.0:
        return _conjugate_sublinear_case(g, t, x)
    return _conjugate_grid(g, t, x)


def _analytic_argmax(g: Generator, t: float, x: float, val: float) -> float | None:
    if not math.isfinite(val):
        return None
    if g.kind == "entropy":
        return x / (2.0 * g.nu)
    if g.kind == "quadratic_upper" and g.nu > 0:
        return math.copysign(max(abs(x) - g.mu, 0.0) / (2.0 * g.nu), x)
    if g.kind in ("sublinear_interval", "scaled_abs", "quadratic_upper"):
        return 0.0
    if g.kind == "quadratic_lower":  # only reachable with mu = nu = 0
        return 0.0
    return None


def _conjugate_sublinear_case(g: Generator, t: float, x: float) -> ConjugatePoint:
    """nu = 0: the sup is 0 or +inf, decided by sign tests on a grid hull."""
    zmax = max(8.0, 8.0 * (abs(x) + g.mu + 1.0))
    z = np.linspace(-zmax, zmax, _GRID_POINTS)
    vals = x * z - g(t, z)
    if g.is_(SUBLINEAR):
        # Positive homogeneity: any strictly positive value scales to +inf.
        if np.any(vals > _GROWTH_TOL * (1.0 + abs(x)) * np.maximum(np.abs(z), 1.0)):
            return ConjugatePoint(x, math.inf, None, 0.0)
        return ConjugatePoint(x, 0.0, 0.0, 0.0)
    # General linear growth: detect divergence from the asymptotic slopes.
    half = zmax / 2.0
    slope_right = (g.scalar(t, zmax) - g.scalar(t, half)) / half
    slope_left = (g.scalar(t, -zmax) - g.scalar(t, -half)) / half
    if x > slope_right + _GROWTH_TOL or -x > slope_left + _GROWTH_TOL:
        return ConjugatePoint(x, math.inf, None, 0.0)
    best = int(np.argmax(vals))
    spacing = z[1] - z[0]
    slope_bound = abs(x) + g.mu
    return ConjugatePoint(x, float(vals[best]), float(z[best]), spacing * slope_bound)


def _conjugate_grid(g: Generator, t: float, x: float) -> ConjugatePoint:
    # The analytic argmax of the quadratic envelope is (|x| - mu) / (2 nu);
    # doubling it guarantees the window contains the optimum.
    zmax = max(8.0, (abs(x) + g.mu) / g.nu)
    center, width = 0.0, 2.0 * zmax
    best_z, best_v = 0.0, -math.inf
    for _ in range(_PASSES):
        z = np.linspace(center - width / 2.0, center + width / 2.0, _GRID_POINTS)
        vals = x * z - g(t, z)
        i = int(np.argmax(vals))
        if vals[i] > best_v:
            best_v, best_z = float(vals[i]), float(z[i])
        center, width = best_z, width / _ZOOM
    spacing = width * _ZOOM / (_GRID_POINTS - 1)
    slope_bound = abs(x) + g.mu + 2.0 * g.nu * (abs(best_z) + spacing)
    return ConjugatePoint(x, best_v, best_z, spacing * slope_bound)


def conjugate_values(g: Generator, t: float, x: np.ndarray) -> np.ndarray:
    """Vectorized conjugate, used for penalty terms along density sweeps."""
    x = np.asarray(x, dtype=float)
    if g.conjugate_fn is not None:
        return np.asarray(g.conjugate_fn(t, x), dtype=float)
    return np.array([conjugate(g, t, xi).value for xi in x.ravel()]).reshape(x.shape)


# ---------------------------------------------------------------------------
# Subdifferential


_DIFF_STEP = 2.0 ** -20


def subdifferential(g: Generator, t: float, z: float) -> tuple[float, float]:
    """The interval [g'(z-), g'(z+)] of a convex driver at z.

    Closed forms are used when attached; otherwise one-sided difference
    quotients with a relative step of 2^-20.  Rejects drivers not flagged
    convex (one-sided slopes of a non-convex function do not bracket a
    subdifferential).
    """
    if not g.is_(CONVEX):
        raise ValueError(f"subdifferential needs a convex driver, got {g.kind!r}")
    z = float(z)
    if g.subdiff_fn is not None:
        lo, hi = g.subdiff_fn(t, np.asarray([z]))
        return float(np.ravel(lo)[0]), float(np.ravel(hi)[0])
    h = _DIFF_STEP * max(1.0, abs(z))
    v = g.scalar(t, z)
    hi = (g.scalar(t, z + h) - v) / h
    lo = (v - g.scalar(t, z - h)) / h
    return lo, hi


def subdifferential_slices(g: Generator, t: float, z: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized subdifferential over a slice of z values."""
    if not g.is_(CONVEX):
        raise ValueError(f"subdifferential needs a convex driver, got {g.kind!r}")
    z = np.asarray(z, dtype=float)
    if g.subdiff_fn is not None:
        lo, hi = g.subdiff_fn(t, z)
        return np.asarray(lo, dtype=float), np.asarray(hi, dtype=float)
    h = _DIFF_STEP * np.maximum(1.0, np.abs(z))
    v = g(t, z)
    return (v - g(t, z - h)) / h, (g(t, z + h) - v) / h


# ---------------------------------------------------------------------------
# Class membership checks


@dataclass
class ClassReport:
    """Outcome of the numeric class checks, with witnesses for failures."""

    checks: dict
    passed: bool

    def witness(self, name: str):
        return self.checks[name].get("witness")


def _record(checks: dict, name: str, gap: float, witness: dict | None, tol: float):
    ok = gap <= tol
    checks[name] = {"ok": ok, "max_gap": gap, "witness": None if ok else witness}


def verify_class(
    g: Generator,
    z_grid: np.ndarray | None = None,
    t_grid: np.ndarray | None = None,
    theta_grid: np.ndarray | None = None,
    tol: float = 1e-9,
) -> ClassReport:
    """Check growth, convexity, sublinearity and one-sided domination on grids.

    Only properties the generator claims via flags are required to hold;
    growth is always required.  Witnesses carry the grid points and the gap.
    """
    z = np.linspace(-6.0, 6.0, 121) if z_grid is None else np.asarray(z_grid, dtype=float)
    ts = np.array([0.0, 0.5, 1.0]) if t_grid is None else np.asarray(t_grid, dtype=float)
    thetas = (np.array([0.1, 0.5, 0.9]) if theta_grid is None
              else np.asarray(theta_grid, dtype=float))
    checks: dict = {}

    worst_gap, worst = 0.0, None
    for t in ts:
        gap = np.abs(g(t, z)) - (g.mu * np.abs(z) + g.nu * z * z)
        i = int(np.argmax(gap))
        if gap[i] > worst_gap:
            worst_gap, worst = float(gap[i]), {"t": float(t), "z": float(z[i]),
                                               "gap": float(gap[i])}
    _record(checks, "growth", worst_gap, worst, tol)

    if g.is_(CONVEX):
        worst_gap, worst = 0.0, None
        for t in ts:
            vals = g(t, z)
            mid = g(t, 0.5 * (z[:, None] + z[None, :]))
            gap = mid - 0.5 * (vals[:, None] + vals[None, :])
            i, j = np.unravel_index(int(np.argmax(gap)), gap.shape)
            if gap[i, j] > worst_gap:
                worst_gap = float(gap[i, j])
                worst = {"t": float(t), "z1": float(z[i]), "z2": float(z[j]),
                         "gap": worst_gap}
        _record(checks, "convexity", worst_gap, worst, tol)

    if g.is_(SUBLINEAR):
        worst_gap, worst = 0.0, None
        lam = np.array([0.0, 0.5, 1.0, 2.0, 5.0])
        for t in ts:
            vals = g(t, z)
            scaled = g(t, lam[:, None] * z[None, :])
            gap_h = np.abs(scaled - lam[:, None] * vals[None, :])
            i, j = np.unravel_index(int(np.argmax(gap_h)), gap_h.shape)
            if gap_h[i, j] > worst_gap:
                worst_gap = float(gap_h[i, j])
                worst = {"t": float(t), "lambda": float(lam[i]), "z": float(z[j]),
                         "gap": worst_gap, "property": "homogeneity"}
            sums = g(t, z[:, None] + z[None, :])
            gap_s = sums - (vals[:, None] + vals[None, :])
            i, j = np.unravel_index(int(np.argmax(gap_s)), gap_s.shape)
            if gap_s[i, j] > worst_gap:
                worst_gap = float(gap_s[i, j])
                worst = {"t": float(t), "z1": float(z[i]), "z2": float(z[j]),
                         "gap": worst_gap, "property": "subadditivity"}
        _record(checks, "sublinearity", worst_gap, worst, tol)

    if g.is_(DOMINATED):
        worst_gap, worst = 0.0, None
        for t in ts:
            vals = g(t, z)
            for theta in thetas:
                # one-sided bound (1-theta) gbar((z - theta zt)/(1-theta))
                diff = z[:, None] - theta * z[None, :]
                bound = g.mu * np.abs(diff) + g.nu * diff * diff / (1.0 - theta)
                gap = vals[:, None] - theta * vals[None, :] - bound
                i, j = np.unravel_index(int(np.argmax(gap)), gap.shape)
                if gap[i, j] > worst_gap:
                    worst_gap = float(gap[i, j])
                    worst = {"t": float(t), "theta": float(theta), "z": float(z[i]),
                             "z_tilde": float(z[j]), "gap": worst_gap}
        _record(checks, "domination", worst_gap, worst, tol)

    return ClassReport(checks, all(c["ok"] for c in checks.values()))
