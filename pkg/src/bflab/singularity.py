"""Characteristic curves and the square-root singularity of P(t, z).

The generating function P(t, z) = sum_i x_i(t) z^i satisfies a quasi-linear
PDE whose characteristics, written with y for the value of P along a curve,
are

  dz/dt = -a(t) z (y - 1),   dy/dt = b(t) z (z - 1),   z(0) = y(0) = y0,

with a = 1 - x_1^2, b = x_1^2 for Bohman-Frieze and a = 1, b = 0 for
Erdos-Renyi.  For fixed t the map y0 -> (z, y) traces the graph of
z -> P(t, z); the dominant singularity is the fold where the first
sensitivity dz/dy0 vanishes.  We co-integrate the first and second
variational equations with respect to y0, so the fold is located by root
finding on dz/dy0 and the local square-root expansion

  P(t, z) = tau - amplitude * sqrt(1 - z/rho) + O(1 - z/rho)

is read off parametrically: amplitude = |dy/dy0| sqrt(2 rho / |d2z/dy0^2|).
Coefficient asymptotics follow: x_i(t) ~ (amplitude / (2 sqrt(pi)))
i^{-3/2} gamma^i with gamma = 1/rho.

Four path integrals (beta, log u, v, q) are accumulated along each curve;
they feed the closed-form amplitude candidate sqrt(2 rho F_z / F_yy) with
F_z = u + q and F_yy = beta^2 rho u, kept alongside the parametric value
for cross-checking.  The two agree identically for Erdos-Renyi; see the
verification suite for how they are compared per rule, and
:func:`verify_against_profile` for the profile-based ground truth.
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import solve_ivp

from .errors import (InsufficientRangeError, InvalidArgumentError,
                     NoSingularityFoundError, StiffnessError)
from .ode import deterministic_kind, tc_of

TWO_SQRT_PI = 2.0 * math.sqrt(math.pi)


@dataclass(frozen=True)
class FlowConfig:
    rel_tol: float = 1e-12
    abs_tol: float = 1e-14


@dataclass(frozen=True)
class CharState:
    """Characteristic endpoint with first and second y0-sensitivities."""

    t: float
    z: float
    y: float
    z_s: float
    y_s: float
    z_ss: float
    y_ss: float
    x1: float


@dataclass(frozen=True)
class QuadratureAccumulators:
    """Path integrals along one characteristic, all zero at t = 0."""

    beta: float      # int (1 - x1^2) ds
    log_u: float     # int (1 - x1^2) (y - 1) ds
    v: float         # int z (z - 1) x1^2 ds
    q: float         # int (2z - 1) x1^2 ds

    @property
    def u(self):
        return math.exp(self.log_u)


@dataclass(frozen=True)
class SingularLocus:
    """Dominant singularity data of z -> P(t, z) at one time.

    ``amplitude`` is the parametric fold coefficient (the one the profile
    obeys); ``c`` is the closed-form quadrature candidate sqrt(2 rho F_z /
    F_yy).  ``gamma`` equals 1/rho exactly.
    """

    t: float
    rho: float
    tau: float
    amplitude: float
    gamma: float
    c: float
    y0_star: float
    amp_rel_diff: float

    def to_json_dict(self):
        return {"t": self.t, "rho": self.rho, "tau": self.tau,
                "amplitude": self.amplitude, "gamma": self.gamma,
                "c": self.c, "y0_star": self.y0_star,
                "amp_rel_diff": self.amp_rel_diff}

    CSV_HEADER = ("t", "rho", "tau", "amplitude", "gamma", "c")

    def csv_row(self):
        return [self.t, self.rho, self.tau, self.amplitude, self.gamma, self.c]


@dataclass(frozen=True)
class AsymptoticCoeffs:
    """Coefficients of x_i(t_c +- eps) ~ C i^{-3/2} exp(-D eps^2 i)."""

    epsilon: float
    C: float
    D: float
    side: str
    t: float
    gamma: float


@dataclass(frozen=True)
class FitReport:
    epsilon: float
    side: str
    t: float
    window: tuple
    n_points: int
    slope: float
    slope_target: float
    slope_rel_err: float
    intercept: float
    intercept_target: float
    r_squared: float

    def to_json_dict(self):
        return {"epsilon": self.epsilon, "side": self.side, "t": self.t,
                "window": list(self.window), "n_points": self.n_points,
                "slope": self.slope, "slope_target": self.slope_target,
                "slope_rel_err": self.slope_rel_err,
                "intercept": self.intercept,
                "intercept_target": self.intercept_target,
                "r_squared": self.r_squared}


# state vector: x1, z, y, Z, Y, ZZ, YY, log_u, v, q, beta
def _char_rhs(kind):
    bf = kind == "bf"

    def rhs(t, w):
        x1, z, y, Z, Y, ZZ, YY = w[:7]
        if bf:
            b = x1 * x1
            a = 1.0 - b
            dx1 = -x1 - b + b * x1
        else:
            a, b, dx1 = 1.0, 0.0, 0.0
        ym1 = y - 1.0
        return [
            dx1,
            -a * z * ym1,
            b * z * (z - 1.0),
            -a * (ym1 * Z + z * Y),
            b * (2.0 * z - 1.0) * Z,
            -a * (ym1 * ZZ + 2.0 * Z * Y + z * YY),
            b * (2.0 * Z * Z + (2.0 * z - 1.0) * ZZ),
            a * ym1,
            b * z * (z - 1.0),
            b * (2.0 * z - 1.0),
            a,
        ]

    return rhs


def _flow_raw(y0, t, kind, config):
    w0 = [1.0, y0, y0, 1.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]
    if t == 0.0:
        return np.asarray(w0)
    sol = solve_ivp(_char_rhs(kind), (0.0, t), w0, method="RK45",
                    rtol=config.rel_tol, atol=config.abs_tol)
    if not sol.success:
        raise StiffnessError(f"characteristic integration failed: {sol.message}",
                             last_t=float(sol.t[-1]))
    return sol.y[:, -1]


def characteristic_flow(y0, t, rule, config=FlowConfig()):
    """Integrate one characteristic with sensitivities and accumulators."""
    if y0 <= 0:
        raise InvalidArgumentError("y0 must be positive")
    if t < 0:
        raise InvalidArgumentError("t must be >= 0")
    kind = deterministic_kind(rule)
    w = _flow_raw(float(y0), float(t), kind, config)
    state = CharState(t=float(t), z=w[1], y=w[2], z_s=w[3], y_s=w[4],
                      z_ss=w[5], y_ss=w[6], x1=w[0])
    acc = QuadratureAccumulators(beta=w[10], log_u=w[7], v=w[8], q=w[9])
    return state, acc


def _locus_from_flow(t, y0, w):
    rho, tau = float(w[1]), float(w[2])
    y_s, z_ss = float(w[4]), float(w[5])
    beta, log_u, q = float(w[10]), float(w[7]), float(w[9])
    if rho <= 0:
        raise NoSingularityFoundError(
            f"fold at t={t} has non-positive rho={rho}",
            diagnostics={"y0_star": y0, "rho": rho})
    if z_ss == 0.0 or y_s == 0.0:
        raise NoSingularityFoundError(
            f"degenerate fold at t={t}: y_s={y_s}, z_ss={z_ss}",
            diagnostics={"y0_star": y0})
    amplitude = abs(y_s) * math.sqrt(2.0 * rho / abs(z_ss))
    u = math.exp(log_u)
    f_z = u + q
    f_yy = beta * beta * rho * u
    c = math.sqrt(2.0 * rho * f_z / f_yy) if f_z > 0 and f_yy > 0 else float("nan")
    rel = abs(amplitude - c) / amplitude if np.isfinite(c) else float("inf")
    return SingularLocus(t=float(t), rho=rho, tau=tau, amplitude=amplitude,
                         gamma=1.0 / rho, c=c, y0_star=float(y0),
                         amp_rel_diff=rel)


def find_singular_point(t, rule, config=FlowConfig(), bracket=(0.01, 4.0),
                        scan_points=61, _seed_bracket=None):
    """Locate the fold nearest y0 = 1: scan for a sign change of dz/dy0,
    bisect, then polish with Newton steps using the second sensitivity."""
    if t <= 0:
        raise InvalidArgumentError("t must be positive")
    kind = deterministic_kind(rule)

    def z_s(y0, full=False):
        w = _flow_raw(y0, t, kind, config)
        return w if full else float(w[3])

    lo = hi = None
    if _seed_bracket is not None:
        a, b = _seed_bracket
        fa, fb = z_s(a), z_s(b)
        if fa == 0.0:
            return _locus_from_flow(t, a, z_s(a, full=True))
        if fa * fb < 0.0:
            lo, hi, flo = a, b, fa
    if lo is None:
        grid = np.geomspace(bracket[0], bracket[1], scan_points)
        vals = np.array([z_s(g) for g in grid])
        exact = np.flatnonzero(vals == 0.0)
        if exact.size:
            y0 = float(grid[exact[0]])
            return _locus_from_flow(t, y0, z_s(y0, full=True))
        flips = np.flatnonzero(vals[:-1] * vals[1:] < 0.0)
        if flips.size == 0:
            k = int(np.argmin(np.abs(vals)))
            raise NoSingularityFoundError(
                f"no sign change of dz/dy0 for t={t} in {bracket}",
                diagnostics={"t": t, "bracket": bracket,
                             "min_abs_z_s": float(np.abs(vals).min()),
                             "argmin_y0": float(grid[k])})
        mids = np.sqrt(grid[flips] * grid[flips + 1])
        j = int(flips[np.argmin(np.abs(np.log(mids)))])
        lo, hi, flo = float(grid[j]), float(grid[j + 1]), float(vals[j])

    for _ in range(60):
        if hi - lo <= 1e-9 * max(1.0, lo):
            break
        mid = 0.5 * (lo + hi)
        fm = z_s(mid)
        if fm == 0.0:
            lo = hi = mid
            break
        if flo * fm < 0.0:
            hi = mid
        else:
            lo, flo = mid, fm

    y0 = 0.5 * (lo + hi)
    w = z_s(y0, full=True)
    for _ in range(8):
        fz, fzz = float(w[3]), float(w[5])
        if fzz == 0.0:
            break
        step = fz / fzz
        y0_new = y0 - step
        if not (lo - (hi - lo) <= y0_new <= hi + (hi - lo)):
            break
        y0 = y0_new
        w = z_s(y0, full=True)
        if abs(step) <= 1e-14 * max(1.0, y0):
            break
    return _locus_from_flow(t, y0, w)


def rho_curve(t_grid, rule, config=FlowConfig(), bracket=(0.01, 4.0)):
    """Per-point singular loci over a time grid, with bracket continuation."""
    t_grid = sorted(float(t) for t in t_grid)
    loci = []
    seed = None
    for t in t_grid:
        locus = find_singular_point(t, rule, config=config, bracket=bracket,
                                    _seed_bracket=seed)
        loci.append(locus)
        width = max(0.05 * locus.y0_star, 1e-3)
        seed = (locus.y0_star - width, locus.y0_star + width)
    return loci


@dataclass(frozen=True)
class CurvatureReport:
    t_center: float
    h: float
    rho_prime: float
    rho_second: float
    rho_prime_halved: float
    rho_second_halved: float

    @property
    def second_consistency(self):
        denom = max(abs(self.rho_second), 1e-30)
        return abs(self.rho_second - self.rho_second_halved) / denom


def rho_curvature(rule, t_center=None, h=1e-3, config=FlowConfig()):
    """5-point central estimates of rho' and rho'' at t_center (default t_c),
    repeated at half spacing as a convergence check."""
    if t_center is None:
        t_center = tc_of(rule)

    def stencil(hh):
        ts = [t_center + k * hh for k in (-2, -1, 0, 1, 2)]
        rhos = [loc.rho for loc in rho_curve(ts, rule, config=config)]
        d1 = (-rhos[4] + 8 * rhos[3] - 8 * rhos[1] + rhos[0]) / (12 * hh)
        d2 = (-rhos[4] + 16 * rhos[3] - 30 * rhos[2] + 16 * rhos[1]
              - rhos[0]) / (12 * hh * hh)
        return d1, d2

    d1, d2 = stencil(h)
    d1h, d2h = stencil(h / 2.0)
    return CurvatureReport(t_center=float(t_center), h=float(h),
                           rho_prime=d1, rho_second=d2,
                           rho_prime_halved=d1h, rho_second_halved=d2h)


def asymptotic_coeffs(eps, side, rule, config=FlowConfig()):
    """Decay coefficients near the critical point: C = amplitude/(2 sqrt(pi)),
    D = -ln(gamma)/eps^2, from the singular locus at t_c -+ eps."""
    if not 0.0 < eps <= 0.2:
        raise InvalidArgumentError(f"need 0 < eps <= 0.2, got {eps}")
    if side not in ("sub", "super"):
        raise InvalidArgumentError(f"side must be 'sub' or 'super', got {side!r}")
    tc = tc_of(rule)
    t = tc - eps if side == "sub" else tc + eps
    locus = find_singular_point(t, rule, config=config)
    return AsymptoticCoeffs(
        epsilon=float(eps),
        C=locus.amplitude / TWO_SQRT_PI,
        D=-math.log(locus.gamma) / (eps * eps),
        side=side, t=t, gamma=locus.gamma)


def verify_against_profile(eps, side, rule, profile, config=FlowConfig(),
                           x_floor=1e-9):
    """Regress ln(x_i i^{3/2}) on i over the profile's geometric-decay window
    and compare slope and intercept against the singularity engine."""
    if side not in ("sub", "super"):
        raise InvalidArgumentError(f"side must be 'sub' or 'super', got {side!r}")
    tc = tc_of(rule)
    t_expect = tc - eps if side == "sub" else tc + eps
    if abs(profile.t - t_expect) > 1e-6:
        raise InvalidArgumentError(
            f"profile is at t={profile.t}, expected t_c {'-' if side == 'sub' else '+'} "
            f"eps = {t_expect:.9f}")

    x = profile.x
    usable = np.flatnonzero(x >= x_floor)
    if usable.size < 120:
        raise InsufficientRangeError(
            f"only {usable.size} components above the fit floor {x_floor:g}")
    i_hi = int(usable[-1]) + 1

    locus = find_singular_point(profile.t, rule, config=config)
    ln_rho = math.log(locus.rho)
    needed = 20.0 / ln_rho if ln_rho > 0 else float("inf")
    if profile.i_max < needed:
        raise InsufficientRangeError(
            f"profile truncation i_max={profile.i_max} is below the required "
            f"window 20/(D eps^2) = {needed:.0f}")
    i_lo = max(64, int(math.ceil(0.1 / ln_rho)) if ln_rho > 0 else 64)
    if i_hi - i_lo < 50:
        raise InsufficientRangeError(
            f"decay window [{i_lo}, {i_hi}) has fewer than 50 points")

    i = np.arange(i_lo, i_hi, dtype=float)
    lny = np.log(x[i_lo - 1:i_hi - 1]) + 1.5 * np.log(i)
    slope, intercept = np.polyfit(i, lny, 1)
    resid = lny - (slope * i + intercept)
    ss_tot = float(np.sum((lny - lny.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid ** 2)) / ss_tot if ss_tot > 0 else float("nan")

    slope_target = -ln_rho
    return FitReport(
        epsilon=float(eps), side=side, t=float(profile.t),
        window=(i_lo, i_hi), n_points=int(i.size),
        slope=float(slope), slope_target=slope_target,
        slope_rel_err=abs(slope - slope_target) / abs(slope_target),
        intercept=float(intercept),
        intercept_target=math.log(locus.amplitude / TWO_SQRT_PI),
        r_squared=r2)


def er_closed_form(t):
    """Exact Erdos-Renyi singularity (rho, tau, amplitude) at time t > 0."""
    if t <= 0:
        raise InvalidArgumentError("t must be positive")
    return (math.exp(t - 1.0) / t, 1.0 / t, math.sqrt(2.0) / t)
