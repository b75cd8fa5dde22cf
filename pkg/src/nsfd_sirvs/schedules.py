"""Time-varying model coefficients and their discrete counterparts.

A SIRVS model instance is parameterized by eight nonnegative coefficient
schedules: Lambda (inflow of newborns), mu (natural mortality), p
(vaccination rate), eta (immunity loss), alpha (disease-induced mortality),
beta (transmission from susceptibles), sigma (transmission from vaccinated)
and gamma (recovery).  This module represents those schedules, the step
denominator function phi(h) used by the nonstandard difference scheme, and
the map producing per-step parameter sequences

    c_n = phi(h) * c(n*h)

from the continuous schedules.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np

from .errors import ConfigError

SCHEDULE_NAMES = ("Lambda", "mu", "p", "eta", "alpha", "beta", "sigma", "gamma")

# Construction-time validation knobs.
_NONNEG_SAMPLES = 10_000
_APERIODIC_HORIZON = 100.0
_PERIOD_RTOL = 1e-12
_DERIV_STEP = 1e-5
_DERIV_RTOL = 1e-6


def _scalar_or_array(t, out):
    if isinstance(t, np.ndarray):
        return np.asarray(out, dtype=float)
    return float(out)


def _ensure_vectorized(fn: Callable) -> Callable:
    """Wrap a scalar-only callable so it also accepts ndarrays."""
    probe = np.array([0.0, 0.5])
    try:
        out = np.asarray(fn(probe), dtype=float)
        if out.shape == probe.shape:
            return fn
    except Exception:
        pass

    def wrapped(t, fn=fn):
        if isinstance(t, np.ndarray):
            return np.array([float(fn(float(x))) for x in t.ravel()]).reshape(t.shape)
        return fn(t)

    return wrapped


@dataclass(frozen=True)
class ParamSchedule:
    """One named, nonnegative coefficient schedule t -> c(t), t >= 0.

    Instances are immutable and safe to share across threads.  Use the
    classmethod constructors (`constant`, `harmonic`, `piecewise`, `custom`);
    they validate nonnegativity, declared periods and supplied derivatives.
    """

    name: str
    kind: str  # "constant" | "harmonic" | "piecewise" | "custom"
    params: dict
    period: float | None
    nonnegative: bool
    smooth: bool
    _fn: Callable = field(compare=False, repr=False)
    _dfn: Callable | None = field(compare=False, repr=False, default=None)

    # -- constructors -------------------------------------------------------

    @classmethod
    def constant(cls, name: str, value: float) -> "ParamSchedule":
        value = float(value)
        if not math.isfinite(value) or value < 0:
            raise ValueError(f"schedule {name!r}: constant value must be finite and >= 0, got {value}")

        def fn(t, v=value):
            return np.full(t.shape, v) if isinstance(t, np.ndarray) else v

        def dfn(t):
            return np.zeros(t.shape) if isinstance(t, np.ndarray) else 0.0

        return cls(name, "constant", {"value": value}, None, True, True, fn, dfn)

    @classmethod
    def harmonic(cls, name: str, base: float, amplitude: float,
                 omega: float, phase: float = 0.0) -> "ParamSchedule":
        """Schedule c(t) = base + amplitude*cos(omega*t + phase)."""
        base, amplitude, omega, phase = map(float, (base, amplitude, omega, phase))
        if omega <= 0:
            raise ValueError(f"schedule {name!r}: harmonic omega must be > 0 (use constant otherwise)")
        if base - abs(amplitude) < 0:
            raise ValueError(
                f"schedule {name!r}: harmonic dips negative (base {base} < |amplitude| {abs(amplitude)})")

        def fn(t):
            return base + amplitude * np.cos(omega * t + phase)

        def dfn(t):
            return -amplitude * omega * np.sin(omega * t + phase)

        params = {"base": base, "amplitude": amplitude, "omega": omega, "phase": phase}
        return cls(name, "harmonic", params, 2.0 * math.pi / omega, True, True, fn, dfn)

    @classmethod
    def piecewise(cls, name: str, breakpoints: Sequence[float], values: Sequence[float],
                  allow_negative: bool = False) -> "ParamSchedule":
        """Left-closed step function: c(t) = values[i] on [breakpoints[i], breakpoints[i+1]).

        The last value extends to +infinity.  The first breakpoint must be 0
        so the whole domain t >= 0 is covered.
        """
        bp = np.asarray(breakpoints, dtype=float)
        vals = np.asarray(values, dtype=float)
        if bp.size == 0 or vals.size == 0:
            raise ConfigError(f"schedule {name!r}: empty piecewise table")
        if bp.size != vals.size:
            raise ConfigError(
                f"schedule {name!r}: {bp.size} breakpoints but {vals.size} values")
        if bp[0] != 0.0:
            raise ConfigError(f"schedule {name!r}: first breakpoint must be 0, got {bp[0]}")
        if np.any(np.diff(bp) <= 0):
            raise ConfigError(f"schedule {name!r}: breakpoints must be strictly increasing")
        if not np.all(np.isfinite(vals)):
            raise ValueError(f"schedule {name!r}: non-finite table value")
        nonneg = bool(np.all(vals >= 0))
        if not nonneg and not allow_negative:
            raise ValueError(f"schedule {name!r}: negative table value (min {vals.min()})")

        def fn(t, bp=bp, vals=vals):
            idx = np.searchsorted(bp, t, side="right") - 1
            return vals[idx]

        params = {"breakpoints": bp.tolist(), "values": vals.tolist()}
        return cls(name, "piecewise", params, None, nonneg, False, fn, None)

    @classmethod
    def custom(cls, name: str, fn: Callable, derivative: Callable | None = None,
               period: float | None = None, allow_negative: bool = False) -> "ParamSchedule":
        """Arbitrary callable schedule.

        Nonnegativity is checked by dense sampling (10^4 points over one
        declared period, or over [0, 100] when aperiodic); a declared period
        and a supplied derivative are cross-checked numerically.
        """
        if period is not None and period <= 0:
            raise ValueError(f"schedule {name!r}: period must be positive")
        fn = _ensure_vectorized(fn)
        if derivative is not None:
            derivative = _ensure_vectorized(derivative)
        horizon = period if period is not None else _APERIODIC_HORIZON
        ts = np.linspace(0.0, horizon, _NONNEG_SAMPLES)
        vals = np.asarray(fn(ts), dtype=float)
        if not np.all(np.isfinite(vals)):
            raise ValueError(f"schedule {name!r}: non-finite value on sample grid")
        scale = 1.0 + float(np.max(np.abs(vals)))
        nonneg = bool(np.all(vals >= -1e-12 * scale))
        if not nonneg and not allow_negative:
            raise ValueError(f"schedule {name!r}: negative value on sample grid "
                             f"(min {vals.min():.6g})")
        if period is not None:
            tp = np.linspace(0.0, period, 64)
            f0 = np.asarray(fn(tp), dtype=float)
            f1 = np.asarray(fn(tp + period), dtype=float)
            bad = np.abs(f1 - f0) > _PERIOD_RTOL * (1.0 + np.abs(f0))
            if np.any(bad):
                raise ValueError(f"schedule {name!r}: declared period {period} not satisfied "
                                 f"(max defect {np.max(np.abs(f1 - f0)):.3g})")
        if derivative is not None:
            tc = np.linspace(_DERIV_STEP, horizon, 64)
            d = np.asarray(derivative(tc), dtype=float)
            fd = (np.asarray(fn(tc + _DERIV_STEP), dtype=float)
                  - np.asarray(fn(tc - _DERIV_STEP), dtype=float)) / (2.0 * _DERIV_STEP)
            bad = np.abs(fd - d) > _DERIV_RTOL * (1.0 + np.abs(d))
            if np.any(bad):
                raise ValueError(f"schedule {name!r}: derivative disagrees with central "
                                 f"differences (max defect {np.max(np.abs(fd - d)):.3g})")
        return cls(name, "custom", {}, period, nonneg, True, fn, derivative)

    # -- evaluation ---------------------------------------------------------

    def eval(self, t):
        """Evaluate at time t (scalar or ndarray); t must be >= 0."""
        arr = np.asarray(t, dtype=float)
        if np.any(arr < 0):
            raise ValueError(f"schedule {self.name!r} evaluated at negative time")
        return _scalar_or_array(t, self._fn(arr if isinstance(t, np.ndarray) else float(arr)))

    @property
    def has_derivative(self) -> bool:
        return self._dfn is not None

    def derivative_at(self, t):
        if self._dfn is None:
            raise ValueError(f"schedule {self.name!r} has no derivative")
        arr = np.asarray(t, dtype=float)
        if np.any(arr < 0):
            raise ValueError(f"schedule {self.name!r} derivative at negative time")
        return _scalar_or_array(t, self._dfn(arr if isinstance(t, np.ndarray) else float(arr)))

    @property
    def is_constant(self) -> bool:
        if self.kind == "constant":
            return True
        if self.kind == "harmonic":
            return self.params["amplitude"] == 0.0
        if self.kind == "piecewise":
            vals = self.params["values"]
            return all(v == vals[0] for v in vals)
        return False

    def constant_value(self) -> float:
        if not self.is_constant:
            raise ValueError(f"schedule {self.name!r} is not constant")
        if self.kind == "constant":
            return self.params["value"]
        if self.kind == "harmonic":
            return self.params["base"]
        return self.params["values"][0]


@dataclass(frozen=True)
class ScheduleSet:
    """The full set of eight coefficient schedules of one model."""

    Lambda: ParamSchedule
    mu: ParamSchedule
    p: ParamSchedule
    eta: ParamSchedule
    alpha: ParamSchedule
    beta: ParamSchedule
    sigma: ParamSchedule
    gamma: ParamSchedule

    def __post_init__(self):
        for name in SCHEDULE_NAMES:
            sched = getattr(self, name)
            if sched is None:
                raise ConfigError(f"missing schedule {name!r}")
            if sched.name != name:
                raise ConfigError(f"schedule named {sched.name!r} assigned to slot {name!r}")

    @classmethod
    def from_mapping(cls, mapping: Mapping[str, ParamSchedule]) -> "ScheduleSet":
        missing = [n for n in SCHEDULE_NAMES if n not in mapping]
        if missing:
            raise ConfigError(f"missing schedules: {', '.join(missing)}")
        extra = [n for n in mapping if n not in SCHEDULE_NAMES]
        if extra:
            raise ConfigError(f"unknown schedules: {', '.join(sorted(extra))}")
        return cls(**{n: mapping[n] for n in SCHEDULE_NAMES})

    def as_dict(self) -> dict:
        return {n: getattr(self, n) for n in SCHEDULE_NAMES}

    def common_period(self) -> float | None:
        """Common declared period of the non-constant schedules, if any.

        Returns None when any non-constant schedule is aperiodic or periods
        disagree; returns None as well when every schedule is constant.
        """
        periods = []
        for name in SCHEDULE_NAMES:
            s = getattr(self, name)
            if s.is_constant:
                continue
            if s.period is None:
                return None
            periods.append(s.period)
        if not periods:
            return None
        ref = periods[0]
        for T in periods[1:]:
            if abs(T - ref) > 1e-12 * max(1.0, ref):
                return None
        return ref

    def all_constant(self) -> bool:
        return all(getattr(self, n).is_constant for n in SCHEDULE_NAMES)


@dataclass(frozen=True)
class DenominatorFn:
    """Step denominator phi(h) of the nonstandard scheme.

    All registered kinds satisfy phi(h) > 0 for h > 0, phi(h) -> 0 and
    phi(h)/h -> 1 as h -> 0; the normalization is what makes the discrete
    and continuous threshold quantities comparable, so it is enforced
    numerically at construction.
    """

    kind: str  # "identity" | "quadratic" | "exp_decay"
    a: float = 0.0
    c: float = 0.0

    @classmethod
    def identity(cls) -> "DenominatorFn":
        return cls("identity")

    @classmethod
    def quadratic(cls, a: float) -> "DenominatorFn":
        a = float(a)
        if a < 0:
            raise ValueError(f"quadratic denominator needs a >= 0, got {a}")
        return cls("quadratic", a=a)

    @classmethod
    def exp_decay(cls, c: float) -> "DenominatorFn":
        c = float(c)
        if c <= 0:
            raise ValueError(f"exp_decay denominator needs c > 0, got {c}")
        return cls("exp_decay", c=c)

    def __post_init__(self):
        if self.kind not in ("identity", "quadratic", "exp_decay"):
            raise ConfigError(f"unknown denominator kind {self.kind!r}")
        ratio = eval_denominator(self, 1e-8) / 1e-8
        if abs(ratio - 1.0) > 1e-6:
            raise ValueError(f"denominator violates phi(h)/h -> 1 (ratio {ratio} at h=1e-8)")


def eval_denominator(d: DenominatorFn, h: float) -> float:
    """Evaluate phi(h); h must be positive."""
    h = float(h)
    if not h > 0:
        raise ValueError(f"denominator needs h > 0, got {h}")
    if d.kind == "identity":
        return h
    if d.kind == "quadratic":
        return h + d.a * h * h
    # exp_decay: (1 - exp(-c h)) / c, expm1 keeps small-h accuracy
    return -math.expm1(-d.c * h) / d.c


def _wrap_sequence(name, value):
    if callable(value):
        return value

    v = float(value)

    def fn(n, v=v):
        return np.full(np.shape(n), v) if isinstance(n, np.ndarray) else v

    return fn


@dataclass(frozen=True)
class DiscreteParams:
    """Per-step parameter sequences of the discrete model.

    Each coefficient is a callable of the step index n (scalar or integer
    ndarray).  When produced by `mickens_discretize`, the value at n is
    exactly phi(h) * c(n*h).
    """

    h: float
    phi_h: float
    step_period: int | None
    Lambda: Callable = field(compare=False)
    mu: Callable = field(compare=False)
    p: Callable = field(compare=False)
    eta: Callable = field(compare=False)
    alpha: Callable = field(compare=False)
    beta: Callable = field(compare=False)
    sigma: Callable = field(compare=False)
    gamma: Callable = field(compare=False)

    @classmethod
    def from_sequences(cls, h: float, step_period: int | None = None,
                       phi_h: float = float("nan"), **seqs) -> "DiscreteParams":
        """Build directly from index sequences (callables or constants)."""
        missing = [n for n in SCHEDULE_NAMES if n not in seqs]
        if missing:
            raise ConfigError(f"missing sequences: {', '.join(missing)}")
        extra = [n for n in seqs if n not in SCHEDULE_NAMES]
        if extra:
            raise ConfigError(f"unknown sequences: {', '.join(sorted(extra))}")
        if not h > 0:
            raise ValueError(f"step size must be positive, got {h}")
        wrapped = {n: _wrap_sequence(n, seqs[n]) for n in SCHEDULE_NAMES}
        return cls(h=float(h), phi_h=phi_h, step_period=step_period, **wrapped)

    def array(self, name: str, start: int, stop: int) -> np.ndarray:
        """Vectorized sequence values over the index range [start, stop)."""
        ns = np.arange(start, stop)
        return np.asarray(getattr(self, name)(ns), dtype=float)


def mickens_discretize(schedules: ScheduleSet, h: float, d: DenominatorFn) -> DiscreteParams:
    """Produce the discrete parameter sequences c_n = phi(h) * c(n*h).

    The multiplication is performed exactly as written, so values agree
    bit-for-bit with eval_denominator(d, h) * schedule.eval(n*h).
    """
    if not isinstance(schedules, ScheduleSet):
        schedules = ScheduleSet.from_mapping(schedules)
    if not h > 0:
        raise ValueError(f"step size must be positive, got {h}")
    h = float(h)
    ph = eval_denominator(d, h)

    def make(sched):
        def seq(n, sched=sched, ph=ph, h=h):
            t = np.asarray(n, dtype=float) * h if isinstance(n, np.ndarray) else n * h
            return ph * sched.eval(t)

        return seq

    T = schedules.common_period()
    step_period: int | None
    if T is None:
        step_period = 1 if schedules.all_constant() else None
    else:
        ratio = T / h
        step_period = int(round(ratio)) if (
            abs(ratio - round(ratio)) <= 1e-9 * max(1.0, ratio) and round(ratio) >= 1
        ) else None

    seqs = {n: make(getattr(schedules, n)) for n in SCHEDULE_NAMES}
    return DiscreteParams(h=h, phi_h=ph, step_period=step_period, **seqs)


@dataclass(frozen=True)
class HypothesisReport:
    """Numeric check of the standing hypotheses on the parameter sequences.

    H3: limsup_n prod_{k=n}^{n+w_mu} 1/(1+mu_k) < 1  (mortality does not vanish)
    H4: liminf_n sum_{k=n+1}^{n+w} of Lambda_k and of p_k are positive
    """

    w_mu: int
    w_Lambda: int
    w_p: int
    scan: tuple[int, int]
    h3_max_product: float
    h4_min_Lambda_sum: float
    h4_min_p_sum: float
    h3_holds: bool
    h4_holds: bool
    warnings: tuple[str, ...] = ()


def validate_hypotheses(dp: DiscreteParams, horizons: tuple[int, int, int] = (1, 1, 1),
                        scan: tuple[int, int] = (0, 1000)) -> HypothesisReport:
    """Scan finite index windows for the H3/H4 hypothesis surrogates."""
    w_mu, w_Lam, w_p = (int(w) for w in horizons)
    lo, hi = (int(s) for s in scan)
    if hi <= lo:
        raise ValueError("empty scan range")
    if min(w_mu, w_Lam, w_p) < 1:
        raise ValueError("horizons must be >= 1")

    w_max = max(w_mu, w_Lam, w_p)
    mu = dp.array("mu", lo, hi + w_mu + 1)
    lam = dp.array("Lambda", lo, hi + w_Lam + 1)
    p = dp.array("p", lo, hi + w_p + 1)

    warnings = []
    for name in SCHEDULE_NAMES:
        vals = dp.array(name, lo, lo + min(hi - lo, 1000) + w_max)
        if np.any(vals < 0):
            warnings.append(f"sequence {name!r} takes negative values on the scan range; "
                            "nonnegativity hypotheses are violated")

    # H3: sliding products of 1/(1+mu_k), k = n .. n+w_mu
    logs = -np.log1p(mu)
    c = np.concatenate([[0.0], np.cumsum(logs)])
    prods = np.exp(c[w_mu + 1:] - c[:-(w_mu + 1)])
    h3_max = float(prods[: hi - lo].max())

    # H4: sliding sums over k = n+1 .. n+w
    def min_window_sum(vals, w):
        cs = np.concatenate([[0.0], np.cumsum(vals)])
        sums = cs[w + 1:] - cs[1:-(w)]
        return float(sums[: hi - lo].min())

    h4_lam = min_window_sum(lam, w_Lam)
    h4_p = min_window_sum(p, w_p)

    return HypothesisReport(
        w_mu=w_mu, w_Lambda=w_Lam, w_p=w_p, scan=(lo, hi),
        h3_max_product=h3_max,
        h4_min_Lambda_sum=h4_lam,
        h4_min_p_sum=h4_p,
        h3_holds=h3_max < 1.0,
        h4_holds=(h4_lam > 0.0) and (h4_p > 0.0),
        warnings=tuple(warnings),
    )
