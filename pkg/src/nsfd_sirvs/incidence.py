"""Incidence (transmission) functions f(x, y).

The discrete model consumes two-argument incidences f(susceptible-like, I);
the continuous model consumes the separable form g(x)*I where
g(x) = d/dy f(x, y) at y = 0.  Both views are bridged by `d2_at_zero`, which
is all the threshold machinery ever needs.

Standing hypotheses on an incidence:
  * f(x, 0) = f(0, y) = 0,
  * f >= 0 on the nonnegative quadrant,
  * y -> f(x, y)/y non-increasing for fixed x,
  * x -> d2f(x, 0) nondecreasing and Lipschitz (constant `lipschitz_k`),
which together imply f(x, y) <= k * x * y.  `validate_incidence` checks all
of these numerically on a grid.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import ConfigError


def _check_xy(x, y):
    if np.any(np.asarray(x) < 0) or np.any(np.asarray(y) < 0):
        raise ValueError("incidence evaluated outside the nonnegative quadrant")


@dataclass(frozen=True)
class IncidenceFn:
    """One incidence function, immutable and shareable.

    kinds:
      mass_action   f(x, y) = x*y
      saturated(a)  f(x, y) = x*y / (1 + a*y)
      standard      f(x, y) = x*y / P   (P supplied per call, `needs_population`)
      separable(g)  f(x, y) = g(x)*y    (g nonnegative, nondecreasing, Lipschitz)
    """

    kind: str
    a: float = 0.0
    lipschitz_k: float = 1.0
    needs_population: bool = False
    _g: Callable | None = field(default=None, compare=False, repr=False)

    @classmethod
    def mass_action(cls) -> "IncidenceFn":
        return cls("mass_action")

    @classmethod
    def saturated(cls, a: float) -> "IncidenceFn":
        a = float(a)
        if a < 0:
            raise ValueError(f"saturation coefficient must be >= 0, got {a}")
        return cls("saturated", a=a)

    @classmethod
    def standard(cls) -> "IncidenceFn":
        # lipschitz_k is per unit population; effective constant is 1/P.
        return cls("standard", needs_population=True)

    @classmethod
    def separable(cls, g: Callable, lipschitz_k: float) -> "IncidenceFn":
        lipschitz_k = float(lipschitz_k)
        if lipschitz_k < 0:
            raise ValueError("lipschitz_k must be >= 0")
        if abs(float(g(0.0))) > 1e-12:
            raise ValueError(f"separable incidence needs g(0) = 0, got {g(0.0)}")
        xs = np.linspace(0.0, 100.0, 1024)
        gv = np.asarray([float(g(x)) for x in xs])
        if np.any(gv < -1e-12):
            raise ValueError("separable incidence needs g >= 0")
        if np.any(np.diff(gv) < -1e-9 * (1.0 + np.max(np.abs(gv)))):
            raise ValueError("separable incidence needs nondecreasing g")
        return cls("separable", lipschitz_k=lipschitz_k, _g=g)

    def __post_init__(self):
        if self.kind not in ("mass_action", "saturated", "standard", "separable"):
            raise ConfigError(f"unknown incidence kind {self.kind!r}")

    def _pop(self, pop):
        if self.needs_population:
            if pop is None or not np.all(np.asarray(pop) > 0):
                raise ValueError("standard incidence needs a positive population scale")
            return pop
        return None

    def eval(self, x, y, pop=None):
        """f(x, y); x, y >= 0 (scalars or arrays)."""
        _check_xy(x, y)
        if self.kind == "mass_action":
            return x * y
        if self.kind == "saturated":
            return x * y / (1.0 + self.a * y)
        if self.kind == "standard":
            return x * y / self._pop(pop)
        if isinstance(x, np.ndarray):
            gx = np.array([float(self._g(v)) for v in x.ravel()]).reshape(x.shape)
        else:
            gx = float(self._g(x))
        return gx * y

    def d2_at_zero(self, x, pop=None):
        """d/dy f(x, y) evaluated at y = 0."""
        _check_xy(x, 0.0)
        if self.kind in ("mass_action", "saturated"):
            return x * 1.0
        if self.kind == "standard":
            return x / self._pop(pop)
        if isinstance(x, np.ndarray):
            return np.array([float(self._g(v)) for v in x.ravel()]).reshape(x.shape)
        return float(self._g(x))

    def d2_lipschitz(self, pop=None) -> float:
        """Effective Lipschitz constant of x -> d2_at_zero(x)."""
        if self.kind == "standard":
            return self.lipschitz_k / float(self._pop(pop))
        return self.lipschitz_k


@dataclass(frozen=True)
class IncidenceReport:
    """Grid validation results for one incidence function."""

    grid: tuple[float, float, int]
    h2_max_abs: float
    h5_max_increase: float
    lipschitz_estimate: float
    lipschitz_ok: bool
    bound_max_violation: float  # relative to 1 + k*x*y
    notes: tuple[str, ...] = ()

    @property
    def passed(self) -> bool:
        return (self.h2_max_abs <= 1e-12 and self.h5_max_increase <= 0.0
                and self.lipschitz_ok and self.bound_max_violation <= 1e-12)


def validate_incidence(f, x_max: float, y_max: float, resolution: int = 256,
                       pop: float | None = None) -> IncidenceReport:
    """Check the standing hypotheses on [0, x_max] x [0, y_max].

    Accepts any object with the IncidenceFn evaluation surface, so broken
    candidates can be screened before being promoted to model inputs.
    """
    if not (x_max > 0 and y_max > 0):
        raise ValueError("grid extents must be positive")
    resolution = int(resolution)
    if resolution < 16:
        raise ValueError("resolution must be >= 16 points per axis")

    xs = np.linspace(0.0, x_max, resolution)
    ys = np.linspace(0.0, y_max, resolution)

    needs_pop = getattr(f, "needs_population", False)
    kw = {"pop": pop} if needs_pop else {}
    if needs_pop and pop is None:
        raise ValueError("validate_incidence needs pop for population-scaled incidence")

    # H2 exactness along both axes.
    h2 = 0.0
    h2 = max(h2, float(np.max(np.abs([f.eval(x, 0.0, **kw) for x in xs]))))
    h2 = max(h2, float(np.max(np.abs([f.eval(0.0, y, **kw) for y in ys]))))

    # H5: y -> f(x, y)/y non-increasing on y > 0 (sampled).
    ypos = ys[1:]
    ratio_scale = 0.0
    h5_violation = -np.inf
    for x in xs[1:]:
        fx = np.asarray([float(f.eval(x, y, **kw)) for y in ypos])
        ratios = fx / ypos
        ratio_scale = max(ratio_scale, float(np.max(np.abs(ratios))))
        h5_violation = max(h5_violation, float(np.max(np.diff(ratios))))
    tol = 1e-9 * (1.0 + ratio_scale)
    h5_excess = max(0.0, h5_violation) if h5_violation > tol else 0.0

    # Lipschitz estimate for x -> d2 f(x, 0).
    d2 = np.asarray([float(f.d2_at_zero(x, **kw)) for x in xs])
    slopes = np.abs(np.diff(d2) / np.diff(xs))
    lip_est = float(np.max(slopes))
    k_eff = f.d2_lipschitz(**kw) if hasattr(f, "d2_lipschitz") else f.lipschitz_k
    lip_ok = lip_est <= k_eff * (1.0 + 1e-9)

    # Derived bound f(x, y) <= k * x * y, measured relative to the product's
    # own magnitude so the check is meaningful at population scales.
    X, Y = np.meshgrid(xs, ys, indexing="ij")
    F = np.asarray(f.eval(X, Y, **kw), dtype=float)
    kxy = k_eff * X * Y
    bound_violation = float(np.max((F - kxy) / (1.0 + kxy)))

    notes = []
    if needs_pop:
        notes.append(
            "population-scaled incidence: the d2 slope varies with the supplied "
            "population, so the fixed-family hypotheses are checked at pop="
            f"{pop:g} only")

    return IncidenceReport(
        grid=(float(x_max), float(y_max), resolution),
        h2_max_abs=h2,
        h5_max_increase=h5_excess,
        lipschitz_estimate=lip_est,
        lipschitz_ok=lip_ok,
        bound_max_violation=max(0.0, bound_violation),
        notes=tuple(notes),
    )
