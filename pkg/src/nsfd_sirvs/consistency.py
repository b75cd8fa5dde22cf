"""Step-size bounds under which discrete and continuous verdicts agree.

With Lambda, mu, eta and p constant, the disease-free solution is the
equilibrium (a, b) and the continuous threshold integrand reduces to

    f(t) = beta(t) g_phi(a) + sigma(t) g_psi(b) - mu - alpha(t) - gamma(t).

When the continuous window integral is decisively negative (positive), the
discrete window product at step h keeps the same verdict for every

    h < h_max = |R_C(lam)| / (sup_t |f'(t)| * (lam + 1)),

the upper bound using R_C^u < 0, the lower one R_C^l > 0.  A constant f
(sup |f'| = 0) yields an unbounded guarantee.  This module builds f, takes
the sup, evaluates the bounds, runs empirical h-sweeps, and constructs the
deliberate period-1 counterexample in which sampling at h = 1/L hits the
minima of a spiky seasonal transmission rate and flips the verdict.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, NamedTuple

import numpy as np

from .dynamics import State, aux_equilibrium
from .incidence import IncidenceFn
from .schedules import DenominatorFn, ParamSchedule, ScheduleSet, mickens_discretize
from .thresholds import Verdict, continuous_thresholds, discrete_thresholds

_CD_STEP = 1e-5
_SUP_GRID = 100_000
_APERIODIC_HORIZON = 100.0


@dataclass
class ConsistencyReport:
    """Continuous thresholds, sup |f'|, and the step bounds they imply.

    `h_max_upper` is populated only when r_c_upper < 0 (extinction side),
    `h_max_lower` only when r_c_lower > 0 (permanence side); math.inf means
    the guarantee holds for every step size in the small-step regime.
    `notes` carries labeled reference values so documented discrepancies
    stay visible next to the computed numbers.
    """

    lam: float
    r_c_lower: float
    r_c_upper: float
    sup_abs_fprime: float
    fprime_argmax: float
    h_max_upper: float | None
    h_max_lower: float | None
    equilibrium: tuple[float, float]
    f_samples: np.ndarray = field(compare=False, repr=False)  # shape (2, K): times and f values
    continuous_verdict: Verdict
    notes: dict = field(default_factory=dict)


class FprimeSup(NamedTuple):
    value: float
    argmax: float


def _require_constant(schedules: ScheduleSet):
    non_constant = [n for n in ("Lambda", "mu", "eta", "p")
                    if not getattr(schedules, n).is_constant]
    if non_constant:
        raise ValueError("step-bound analysis needs constant Lambda, mu, eta, p; "
                         f"non-constant: {', '.join(non_constant)}")


def net_growth_function(schedules: ScheduleSet, phi: IncidenceFn,
                        psi: IncidenceFn) -> tuple[Callable, Callable, bool]:
    """Build f(t) and f'(t) along the disease-free equilibrium.

    Requires constant Lambda, mu, eta, p.  f' is assembled from the
    schedules' analytic derivatives when beta, sigma, alpha, gamma all carry
    one; otherwise it falls back to Richardson-extrapolated central
    differences with step 1e-5.  Returns (f, fprime, analytic).
    """
    _require_constant(schedules)
    for name in ("beta", "sigma", "alpha", "gamma"):
        if getattr(schedules, name).kind == "piecewise" and not getattr(schedules, name).is_constant:
            raise ValueError(f"schedule {name!r} is a step function; f is not differentiable")
    a, b = aux_equilibrium(schedules.Lambda.constant_value(),
                           schedules.mu.constant_value(),
                           schedules.eta.constant_value(),
                           schedules.p.constant_value())
    pop = a + b if (phi.needs_population or psi.needs_population) else None
    ga = float(phi.d2_at_zero(a, pop))
    gb = float(psi.d2_at_zero(b, pop))
    mu = schedules.mu.constant_value()
    beta, sigma, alpha, gamma = (schedules.beta, schedules.sigma,
                                 schedules.alpha, schedules.gamma)

    def f(t):
        return (beta.eval(t) * ga + sigma.eval(t) * gb
                - mu - alpha.eval(t) - gamma.eval(t))

    analytic = all(s.has_derivative for s in (beta, sigma, alpha, gamma))
    if analytic:
        def fprime(t):
            return (beta.derivative_at(t) * ga + sigma.derivative_at(t) * gb
                    - alpha.derivative_at(t) - gamma.derivative_at(t))
    else:
        def fprime(t):
            # Richardson-extrapolated central differences; points closer to 0
            # than the stencil are evaluated at the clamped abscissa instead.
            tt = np.maximum(np.asarray(t, dtype=float), _CD_STEP)
            d1 = (f(tt + _CD_STEP) - f(tt - _CD_STEP)) / (2.0 * _CD_STEP)
            d2 = (f(tt + _CD_STEP / 2) - f(tt - _CD_STEP / 2)) / _CD_STEP
            out = (4.0 * d2 - d1) / 3.0
            return out if isinstance(t, np.ndarray) else float(out)

    return f, fprime, analytic


def sup_abs_fprime(fprime: Callable, scan: tuple[float, float],
                   grid: int = _SUP_GRID) -> FprimeSup:
    """Grid maximum of |f'| over the scan range, with its argmax.

    One period suffices for periodic f; the result is exact up to grid
    resolution, so use at least 1e3 points per period.
    """
    t0, t1 = (float(s) for s in scan)
    grid = int(grid)
    if not t1 > t0:
        raise ValueError("empty scan range")
    if grid < 1000:
        raise ValueError("grid must be >= 1000 points")
    ts = np.linspace(t0, t1, grid + 1)
    vals = np.abs(np.asarray(fprime(ts), dtype=float))
    i = int(np.argmax(vals))
    return FprimeSup(value=float(vals[i]), argmax=float(ts[i]))


def h_max(r_c: float, sup_fprime: float, lam: float, side: str) -> float | None:
    """Theoretical step bound; None when the sign condition fails.

    side="upper": needs r_c < 0, returns -r_c / (sup |f'| (lam+1)).
    side="lower": needs r_c > 0, returns  r_c / (sup |f'| (lam+1)).
    A zero sup |f'| (constant coefficients) gives an unbounded guarantee.
    """
    if side not in ("upper", "lower"):
        raise ValueError(f"side must be 'upper' or 'lower', got {side!r}")
    if sup_fprime < 0:
        raise ValueError("sup |f'| must be >= 0")
    if side == "upper":
        if not r_c < 0:
            return None
        magnitude = -r_c
    else:
        if not r_c > 0:
            return None
        magnitude = r_c
    if sup_fprime == 0.0:
        return math.inf
    return magnitude / (sup_fprime * (lam + 1.0))


def consistency_report(schedules: ScheduleSet, phi: IncidenceFn, psi: IncidenceFn,
                       lam: float, scan: tuple[float, float] | None = None,
                       quad_step: float | None = None,
                       notes: dict | None = None) -> ConsistencyReport:
    """Assemble the full step-bound report for one model."""
    cont = continuous_thresholds(schedules, phi, psi, lam, scan=scan, quad_step=quad_step)
    f, fprime, analytic = net_growth_function(schedules, phi, psi)
    T = schedules.common_period()
    sup_scan = (0.0, T) if T is not None else (0.0, _APERIODIC_HORIZON)
    sup = sup_abs_fprime(fprime, sup_scan)
    a, b = aux_equilibrium(schedules.Lambda.constant_value(),
                           schedules.mu.constant_value(),
                           schedules.eta.constant_value(),
                           schedules.p.constant_value())
    ts = np.linspace(sup_scan[0], sup_scan[1], 257)
    report_notes = dict(notes or {})
    if T is None:
        report_notes.setdefault(
            "sup_fprime_scan",
            f"aperiodic coefficients: sup |f'| taken over [0, {_APERIODIC_HORIZON:g}] only")
    if not analytic:
        report_notes.setdefault("fprime", "central differences (no analytic derivative)")
    return ConsistencyReport(
        lam=lam,
        r_c_lower=cont.r_lower,
        r_c_upper=cont.r_upper,
        sup_abs_fprime=sup.value,
        fprime_argmax=sup.argmax,
        h_max_upper=h_max(cont.r_upper, sup.value, lam, "upper"),
        h_max_lower=h_max(cont.r_lower, sup.value, lam, "lower"),
        equilibrium=(a, b),
        f_samples=np.vstack([ts, np.asarray(f(ts), dtype=float)]),
        continuous_verdict=cont.verdict,
        notes=report_notes,
    )


def lambda_steps(lam: float, h: float) -> int:
    """Discrete window index for continuous window lam at step h.

    The product then has ceil(lam/h) factors, the smallest step window
    spanning at least lam time units; for h not dividing lam this equals
    floor(lam/h).
    """
    if not (lam >= 0 and h > 0):
        raise ValueError("need lam >= 0 and h > 0")
    return max(0, int(math.ceil(lam / h - 1e-9)) - 1)


@dataclass(frozen=True)
class SweepRow:
    h: float
    lam_steps: int
    r_lower: float
    r_upper: float
    verdict: Verdict
    matches: bool


def consistency_sweep(schedules: ScheduleSet, phi: IncidenceFn, psi: IncidenceFn,
                      denominator: DenominatorFn, lam: float,
                      report: ConsistencyReport | None = None, n: int = 16,
                      lo_frac: float = 0.01, hi_frac: float = 0.99,
                      burn_in: int = 2000, scan: int = 4000) -> list[SweepRow]:
    """Empirical check of the guarantee: verdicts at n log-spaced h below h_max.

    Raises when the continuous verdict is inconclusive or the bound is
    unbounded (nothing to sweep against).
    """
    if report is None:
        report = consistency_report(schedules, phi, psi, lam)
    if report.continuous_verdict is Verdict.EXTINCTION:
        bound = report.h_max_upper
    elif report.continuous_verdict is Verdict.PERMANENCE:
        bound = report.h_max_lower
    else:
        raise ValueError("continuous verdict is inconclusive; no bound to sweep")
    if bound is None or not math.isfinite(bound):
        raise ValueError("step bound is unbounded or undefined; nothing to sweep")

    rows = []
    for h in np.geomspace(bound * lo_frac, bound * hi_frac, int(n)):
        dp = mickens_discretize(schedules, float(h), denominator)
        lam_d = lambda_steps(lam, float(h))
        rep = discrete_thresholds(dp, phi, psi, lam_d, burn_in=burn_in,
                                  scan=max(scan, lam_d + 1))
        rows.append(SweepRow(h=float(h), lam_steps=lam_d, r_lower=rep.r_lower,
                             r_upper=rep.r_upper, verdict=rep.verdict,
                             matches=rep.verdict is report.continuous_verdict))
    return rows


@dataclass(frozen=True)
class InconsistencyExample:
    """Period-1 counterexample scenario plus its closed-form diagnostics.

    The transmission rate beta(t) = d [1 + c sin^2(2 pi L t)(1 + cos 2 pi t)]
    vanishes down to d exactly at the sampling instants t = k/L, so the
    discrete model at h = 1/L never sees the seasonal spikes:

      * continuous window integral (closed form): R_C_l(1) = d(1 + c/2)
        - mu - alpha - gamma, positive (permanence) once c > 2(mu+gamma+
        alpha-d)/d;
      * one-period product evaluated literally from its definition (the
        value reported by `discrete_thresholds`);
      * the simplified reported ratio (1 + d/L)/(1 + mu + alpha + gamma),
        kept alongside because it differs from the literal evaluation (the
        literal per-factor ratio is (1 + d/L)/(1 + (mu+alpha+gamma)/L)).
    """

    spec: object  # ScenarioSpec
    r_c_lower_closed_form: float
    discrete_reported_closed_form: float
    continuous_permanent_regime: bool
    discrete_subthreshold_regime: bool

    @property
    def inconsistency_expected(self) -> bool:
        return self.continuous_permanent_regime and self.discrete_subthreshold_regime


def inconsistency_example(L: int, d: float, c: float, mu: float, gamma: float,
                          alpha: float, eta: float, p: float,
                          t_end: float = 400.0) -> InconsistencyExample:
    """Build the period-1 system that is inconsistent at step h = 1/L."""
    L = int(L)
    if L < 1:
        raise ValueError("L must be a positive integer")
    if c < 0:
        raise ValueError("seasonal amplitude c must be >= 0")
    for name, v in (("d", d), ("mu", mu), ("gamma", gamma),
                    ("alpha", alpha), ("eta", eta), ("p", p)):
        if v <= 0:
            raise ValueError(f"parameter {name} must be positive")

    def seasonal(t):
        return d * (1.0 + c * np.sin(2.0 * np.pi * L * t) ** 2
                    * (1.0 + np.cos(2.0 * np.pi * t)))

    def seasonal_deriv(t):
        return d * c * (2.0 * np.pi * L * np.sin(4.0 * np.pi * L * t)
                        * (1.0 + np.cos(2.0 * np.pi * t))
                        - 2.0 * np.pi * np.sin(2.0 * np.pi * L * t) ** 2
                        * np.sin(2.0 * np.pi * t))

    def make(name):
        return ParamSchedule.custom(name, seasonal, derivative=seasonal_deriv, period=1.0)

    schedules = ScheduleSet(
        Lambda=ParamSchedule.constant("Lambda", mu),  # inflow matched to mortality
        mu=ParamSchedule.constant("mu", mu),
        p=ParamSchedule.constant("p", p),
        eta=ParamSchedule.constant("eta", eta),
        alpha=ParamSchedule.constant("alpha", alpha),
        beta=make("beta"),
        sigma=make("sigma"),
        gamma=ParamSchedule.constant("gamma", gamma),
    )

    r_c_closed = d * (1.0 + c / 2.0) - mu - alpha - gamma
    reported = (1.0 + d / L) / (1.0 + mu + alpha + gamma)
    from .scenarios import ScenarioSpec  # deferred: scenarios imports this module

    spec = ScenarioSpec(
        name=f"inconsistency_L{L}",
        schedules=schedules,
        incidence_phi=IncidenceFn.mass_action(),
        incidence_psi=IncidenceFn.mass_action(),
        denominator=DenominatorFn.identity(),
        h_values=(1.0 / L,),
        lam=1.0,
        t_end=t_end,
        initial_state=State(0.3, 0.2, 0.1, 0.4),
        notes=("Period-1 seasonal forcing whose spikes fall between the sampling "
               f"instants t = k/{L}; the continuous model is permanent while the "
               f"discrete model at h = 1/{L} is not."),
        reference_values={
            "r_c_lower_closed_form": r_c_closed,
            "discrete_threshold_reported_closed_form": reported,
        },
    )
    return InconsistencyExample(
        spec=spec,
        r_c_lower_closed_form=r_c_closed,
        discrete_reported_closed_form=reported,
        continuous_permanent_regime=r_c_closed > 0,
        discrete_subthreshold_regime=reported < 1,
    )
