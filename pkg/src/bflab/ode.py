"""Deterministic limit of the component-density system.

For the fraction x_i(t) of vertices in components of size i the two
supported processes obey

  Erdos-Renyi:    x_i' = -i x_i + (i/2) sum_{k<i} x_k x_{i-k}
  Bohman-Frieze:  x_1' = -x_1 - x_1^2 + x_1^3
                  x_2' = 2 x_1^2 - x_1^4 - 2 (1 - x_1^2) x_2
                  x_i' = (i/2)(1 - x_1^2) sum_{k<i} x_k x_{i-k}
                         - i (1 - x_1^2) x_i          (i >= 3)

with x_1(0) = 1.  The system is lower-triangular in i, so truncation at
i_max leaves x_1..x_{i_max} exact; only the tail mass is truncated.

The susceptibility s(t) blows up at the critical point t_c.  All
near-critical work goes through r = 1/s, which satisfies

  Bohman-Frieze:  r' = -x_1^2 r^2 - (1 - x_1^2),   r(0) = 1
  Erdos-Renyi:    r' = -1                          (s' = s^2)

and t_c is the root of r, located by event detection plus bisection.
"""

import functools
import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.integrate import solve_ivp
from scipy.signal import fftconvolve
from scipy.special import gammaln

from .errors import (BlowupError, InvalidArgumentError, NoBlowupError,
                     ResolutionError, StiffnessError, UnsupportedRuleError)
from .process import ProcessRule, bf_decision_table

_FFT_THRESHOLD = 512


class TailMassWarning(UserWarning):
    """A moment was computed from a profile with non-negligible tail mass."""


@dataclass(frozen=True)
class OdeConfig:
    i_max: int = 2048
    rel_tol: float = 1e-10
    abs_tol: float = 1e-12
    h_max: float = math.inf
    checkpoints: tuple = ()
    conv: str = "auto"             # "direct" | "fft" | "auto"

    def __post_init__(self):
        if self.i_max < 2:
            raise InvalidArgumentError("i_max must be >= 2")
        if self.rel_tol <= 0 or self.abs_tol <= 0:
            raise InvalidArgumentError("tolerances must be positive")
        if self.conv not in ("direct", "fft", "auto"):
            raise InvalidArgumentError(f"unknown convolution mode {self.conv!r}")


@dataclass(frozen=True)
class SmallCompProfile:
    """Truncated density vector at one time; x[0] holds x_1."""

    t: float
    x: np.ndarray
    tail_mass: float

    @property
    def i_max(self):
        return len(self.x)


@dataclass(frozen=True)
class CriticalPoint:
    t_c: float
    bracket_width: float
    rule: str

    def to_json_dict(self):
        return {"rule": self.rule, "t_c": self.t_c,
                "bracket_width": self.bracket_width}


@dataclass(frozen=True)
class SusceptibilityTrace:
    """Grid of (t, r = 1/s) with the co-integrated x_1."""

    rule: str
    t: np.ndarray
    r: np.ndarray
    x1: np.ndarray

    @property
    def s(self):
        return 1.0 / self.r


def deterministic_kind(rule):
    """Map a ProcessRule onto the rules with known equations ("er" | "bf")."""
    if isinstance(rule, str):
        if rule in ("er", "bf"):
            return rule
        raise UnsupportedRuleError(f"no deterministic equations for rule {rule!r}")
    if rule.kind in ("er", "bf"):
        return rule.kind
    if rule.kind == "bounded" and rule.k == 1 and rule.table == bf_decision_table():
        return "bf"
    raise UnsupportedRuleError(
        f"no deterministic equations for rule {rule.label()}; "
        "only er, bf, and the K=1 table equivalent to bf are supported")


def _pair_convolution(x, mode):
    # conv[j] = sum_{k} x_{k+1} x_{j-k+1); entry j corresponds to size j+2
    if mode == "auto":
        mode = "fft" if len(x) >= _FFT_THRESHOLD else "direct"
    if mode == "fft":
        return fftconvolve(x, x)[: len(x) - 1]
    return np.convolve(x, x)[: len(x) - 1]


def rhs_bf(x, conv="direct"):
    """Right-hand side of the Bohman-Frieze density system."""
    x = np.asarray(x, dtype=float)
    if x.size < 2:
        raise InvalidArgumentError("density vector must have length >= 2")
    x1 = x[0]
    common = 1.0 - x1 * x1
    i = np.arange(1, x.size + 1, dtype=float)
    s = _pair_convolution(x, conv)
    dx = np.empty_like(x)
    dx[1:] = 0.5 * i[1:] * common * s - i[1:] * common * x[1:]
    dx[0] = -x1 - x1 * x1 + x1 ** 3
    dx[1] = 2.0 * x1 * x1 - x1 ** 4 - 2.0 * common * x[1]
    return dx


def rhs_er(x, conv="direct"):
    """Right-hand side of the Erdos-Renyi density system."""
    x = np.asarray(x, dtype=float)
    if x.size < 2:
        raise InvalidArgumentError("density vector must have length >= 2")
    i = np.arange(1, x.size + 1, dtype=float)
    s = _pair_convolution(x, conv)
    dx = -i * x
    dx[1:] += 0.5 * i[1:] * s
    return dx


def _make_rhs(kind, i_max, conv):
    i = np.arange(1, i_max + 1, dtype=float)
    if kind == "er":
        def rhs(t, x):
            dx = -i * x
            dx[1:] += 0.5 * i[1:] * _pair_convolution(x, conv)
            return dx
    else:
        def rhs(t, x):
            x1 = x[0]
            common = 1.0 - x1 * x1
            dx = np.empty_like(x)
            dx[1:] = (0.5 * i[1:] * _pair_convolution(x, conv)
                      - i[1:] * x[1:]) * common
            dx[0] = -x1 - x1 * x1 + x1 ** 3
            dx[1] = 2.0 * x1 * x1 - x1 ** 4 - 2.0 * common * x[1]
            return dx
    return rhs


def _build_profile(t, x, abs_tol):
    neg_floor = max(1e3 * abs_tol, 1e-11)
    if np.any(x < -neg_floor):
        worst = float(x.min())
        raise StiffnessError(
            f"integration produced a density of {worst:.3e} at t={t}", last_t=t)
    x = np.where(x < 0.0, 0.0, x)
    total = float(x.sum())
    if total > 1.0 + 1e-8:
        raise StiffnessError(
            f"density sum {total} exceeds 1 beyond tolerance at t={t}", last_t=t)
    return SmallCompProfile(t=float(t), x=x, tail_mass=max(0.0, 1.0 - total))


def integrate_profile(rule, t_end, config=None, assert_conservation=True):
    """Integrate the density system; profiles at each checkpoint and t_end.

    With ``assert_conservation`` the target must be subcritical (total mass 1
    is asserted); disable it to integrate past t_c, where mass leaks to the
    giant and the truncated sum drops below 1.
    """
    kind = deterministic_kind(rule)
    config = config or OdeConfig()
    if t_end < 0:
        raise InvalidArgumentError("t_end must be >= 0")
    if assert_conservation:
        crit = find_tc(rule)
        if t_end >= crit.t_c:
            raise BlowupError(
                f"t_end={t_end} is at or past the susceptibility blow-up "
                f"t_c={crit.t_c:.10f}; rerun without conservation assertion "
                "to integrate the (regular) density system past t_c",
                t_c=crit.t_c)
    times = sorted({float(c) for c in config.checkpoints} | {float(t_end)})
    if times and (times[0] < 0 or times[-1] > t_end):
        raise InvalidArgumentError("checkpoints must lie in [0, t_end]")

    x0 = np.zeros(config.i_max)
    x0[0] = 1.0
    if t_end == 0.0:
        return [_build_profile(0.0, x0, config.abs_tol)]

    eval_times = [t for t in times if t > 0.0]
    sol = solve_ivp(_make_rhs(kind, config.i_max, config.conv),
                    (0.0, t_end), x0, method="RK45", t_eval=eval_times,
                    rtol=config.rel_tol, atol=config.abs_tol,
                    max_step=config.h_max)
    if not sol.success:
        last = float(sol.t[-1]) if sol.t.size else 0.0
        raise StiffnessError(f"integrator failed: {sol.message}", last_t=last)

    profiles = []
    if 0.0 in times:
        profiles.append(_build_profile(0.0, x0, config.abs_tol))
    for j, t in enumerate(eval_times):
        profiles.append(_build_profile(t, sol.y[:, j], config.abs_tol))
    return profiles


def moment(profile, k):
    """k-th size moment sum_i i^k x_i of a truncated profile.

    Warns with a geometric tail estimate when the profile's tail mass is
    non-negligible, since sizes beyond the truncation are then unaccounted.
    """
    if not isinstance(k, (int, np.integer)) or k < 0:
        raise InvalidArgumentError(f"moment order must be an integer >= 0, got {k}")
    i = np.arange(1, profile.i_max + 1, dtype=float)
    value = float(np.dot(i ** k, profile.x))
    if profile.tail_mass > 1e-10:
        est = _tail_moment_estimate(profile, k)
        warnings.warn(
            f"tail mass {profile.tail_mass:.3e} beyond i_max={profile.i_max}; "
            f"truncated moment {value:.6g} underestimates by roughly {est:.3g}",
            TailMassWarning, stacklevel=2)
    return value


def _tail_moment_estimate(profile, k):
    x = profile.x
    if x.size < 2 or x[-1] <= 0 or x[-2] <= 0 or x[-1] >= x[-2]:
        return float("nan")
    ratio = x[-1] / x[-2]
    imax = x.size
    # geometric continuation of the vertex mass, sizes of order i_max
    tail_vertex_mass = float(x[-1] * ratio / (1.0 - ratio))
    return tail_vertex_mass * imax ** k


def _xr_rhs(kind):
    if kind == "er":
        def rhs(t, w):
            return [-w[0], -1.0]
    else:
        def rhs(t, w):
            x1, r = w
            b = x1 * x1
            return [-x1 - b + b * x1, -b * r * r - (1.0 - b)]
    return rhs


@functools.lru_cache(maxsize=None)
def _find_tc_cached(kind, precision, t_max, rel_tol):
    rtol = rel_tol if rel_tol is not None else min(1e-10, precision * 1e-3)
    rtol = max(rtol, 1e-13)
    atol = rtol * 1e-2

    crossing = lambda t, w: w[1]
    crossing.terminal = False
    crossing.direction = -1
    floor = lambda t, w: w[1] + 0.05
    floor.terminal = True
    floor.direction = -1

    sol = solve_ivp(_xr_rhs(kind), (0.0, t_max), [1.0, 1.0], method="RK45",
                    rtol=rtol, atol=atol, dense_output=True,
                    events=(crossing, floor))
    if not sol.success and sol.status != 1:
        raise StiffnessError(f"integrator failed: {sol.message}",
                             last_t=float(sol.t[-1]))
    if sol.t_events[0].size == 0:
        raise NoBlowupError(
            f"susceptibility did not blow up before t_max={t_max}")
    t_ev = float(sol.t_events[0][0])
    t_hi_max = float(sol.t[-1])

    r_of = lambda t: float(sol.sol(t)[1])
    w = max(precision / 2.0, 1e-13)
    lo = max(0.0, t_ev - w)
    while r_of(lo) <= 0.0:
        w *= 2.0
        lo = max(0.0, t_ev - w)
    w = max(precision / 2.0, 1e-13)
    hi = min(t_hi_max, t_ev + w)
    while r_of(hi) > 0.0:
        w *= 2.0
        hi = min(t_hi_max, t_ev + w)
    while hi - lo > precision:
        mid = 0.5 * (lo + hi)
        if r_of(mid) > 0.0:
            lo = mid
        else:
            hi = mid
    return CriticalPoint(t_c=0.5 * (lo + hi), bracket_width=hi - lo, rule=kind)


def find_tc(rule, precision=1e-9, t_max=10.0, rel_tol=None):
    """Critical point as the root of r = 1/s, bracketed to ``precision``."""
    if precision <= 0:
        raise InvalidArgumentError("precision must be positive")
    kind = deterministic_kind(rule)
    return _find_tc_cached(kind, float(precision), float(t_max), rel_tol)


def tc_of(rule):
    """Cached high-precision critical point of a rule."""
    return find_tc(rule, precision=1e-10).t_c


def susceptibility_trace(rule, t_grid, rel_tol=1e-12):
    """r(t) = 1/s(t) and x_1(t) on a subcritical grid."""
    kind = deterministic_kind(rule)
    t_grid = np.asarray(sorted(float(t) for t in t_grid))
    if t_grid.size == 0 or t_grid[0] < 0:
        raise InvalidArgumentError("t_grid must be non-empty and non-negative")
    crit = find_tc(rule)
    if t_grid[-1] >= crit.t_c:
        raise InvalidArgumentError(
            f"susceptibility blows up at t_c={crit.t_c:.10f}; grid must stay below")
    sol = solve_ivp(_xr_rhs(kind), (0.0, float(t_grid[-1])), [1.0, 1.0],
                    method="RK45", rtol=rel_tol, atol=rel_tol * 1e-2,
                    dense_output=True)
    if not sol.success:
        raise StiffnessError(f"integrator failed: {sol.message}",
                             last_t=float(sol.t[-1]))
    w = sol.sol(t_grid)
    return SusceptibilityTrace(rule=kind, t=t_grid, r=w[1], x1=w[0])


def _mu_rhs(kind, exact_rate):
    base = _xr_rhs(kind)

    def rhs(t, w):
        dx1, dr = base(t, w[:2])
        x1, r = w[0], w[1]
        weight = 1.0 if kind == "er" else 1.0 - x1 * x1
        s = 1.0 / r
        if exact_rate:
            acc = 0.5 * weight * (s - 1.0 - t)
        else:
            acc = 0.5 * weight * s
        return [dx1, dr, acc]

    return rhs


def _cycle_integral(eps, rule, exact_rate):
    kind = deterministic_kind(rule)
    crit = find_tc(rule, precision=1e-10)
    if not 0.0 < eps < crit.t_c:
        raise InvalidArgumentError(f"need 0 < eps < t_c={crit.t_c:.6f}, got {eps}")
    floor = max(1e-7, 10.0 * crit.bracket_width)
    if eps < floor:
        raise ResolutionError(
            f"eps={eps} is below the trace resolution floor {floor:.2e}")
    t_end = crit.t_c - eps
    if t_end == 0.0:
        return 0.0
    sol = solve_ivp(_mu_rhs(kind, exact_rate), (0.0, t_end), [1.0, 1.0, 0.0],
                    method="RK45", rtol=1e-12, atol=1e-14)
    if not sol.success:
        raise StiffnessError(f"integrator failed: {sol.message}",
                             last_t=float(sol.t[-1]))
    return float(sol.y[2, -1])


def mu_epsilon(eps, rule=ProcessRule.bohman_frieze()):
    """Leading-order mean cycle count (1/2) int_0^{t_c-eps} (1-x_1^2) s dt.

    The integrand is evaluated as (1 - x_1^2)/r to stay finite near blow-up.
    """
    return _cycle_integral(eps, rule, exact_rate=False)


def expected_cycle_count(eps, rule=ProcessRule.bohman_frieze()):
    """Mean cycle count with the within-component pair count taken exactly.

    A candidate edge falls inside an existing component with probability
    [sum_C binom(|C|,2) - m] / [binom(n,2) - m]; per vertex that is
    (s - 1 - t)/n + O(1/n^2), not s/n.  The leading-order integrand of
    :func:`mu_epsilon` drops the -1-t term, which costs an O(1) constant at
    fixed eps (for Erdos-Renyi this exact-rate integral reproduces the
    classical cycle count (1/2)ln(1/(1-t)) - t/2 - t^2/4).
    """
    return _cycle_integral(eps, rule, exact_rate=True)


def er_exact_xi(t, i):
    """Closed-form Erdos-Renyi density x_i(t) = e^{-ti}(ti)^{i-1}/i!.

    Evaluated in log space, so it stays finite for i up to 1e6 and beyond.
    Accepts scalar or array ``i``.
    """
    if t <= 0:
        raise InvalidArgumentError("t must be positive")
    i_arr = np.asarray(i, dtype=float)
    if np.any(i_arr < 1):
        raise InvalidArgumentError("component size i must be >= 1")
    log_val = -t * i_arr + (i_arr - 1.0) * np.log(t * i_arr) - gammaln(i_arr + 1.0)
    out = np.exp(log_val)
    return float(out) if np.isscalar(i) else out
