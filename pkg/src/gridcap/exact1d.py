"""Exact temperature overload decay rate for a single stochastic line.

With one mean-reverting injection feeding one line (|C| = 1 so the current
mirrors the injection), the cheapest action that drives the temperature to
its limit at the horizon minimizes

    I(theta) = 1/2 integral ((tau theta'' + theta') / (2 sqrt(tau theta' + theta))
               + gamma sqrt(tau theta' + theta) - gamma mu)^2 / l^2 dt

over theta(0) = mu^2, theta(T) = 1. Writing f = tau theta' + theta (the
squared current) and g = sqrt(f), the integrand is (g' + gamma (g - mu))^2 / l^2
and the stationarity system collapses losslessly: the combination

    E(t) = (g'' - gamma^2 (g - mu)) / (2 g)

obeys tau E' = E, so E(t) = E(T) e^{(t-T)/tau} and the whole boundary value
problem reduces to integrating

    theta' = (g^2 - theta)/tau,   g' = p,   p' = gamma^2 (g - mu) + 2 E(t) g

from (mu^2, mu, p0) and choosing (p0, E(T)) so that theta(T) = 1 at minimal
action. The public shooting parameters are the missing initial data of the
equivalent 4-D system in y = [theta, f, f', f'']: x1 = f'(0), x2 = f''(0),
related bijectively to (p0, E(0)) through f = g^2.

The cubic form of the stationarity condition, used by `euler_residual`, is

    4 gamma^2 f^3 + 2 tau f^2 f''' - 2 f^2 f'' + f (f')^2 - 4 tau f f' f''
      + 2 tau (f')^3 - 2 gamma^2 mu f^{3/2} (2 f + tau f') = 0

whose final term vanishes only for mu = 0; dropping it would make the
constant path f = mu^2 spuriously non-stationary.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.integrate import solve_ivp
from scipy.optimize import brentq, minimize_scalar

from .errors import BlowUp, DegenerateF, NegativeRadicand, NoBoundaryHit
from .thermal import TemperaturePath

__all__ = [
    "Exact1dProblem",
    "ShotResult",
    "Exact1dResult",
    "functional_value",
    "euler_residual",
    "shoot",
    "exact_decay_rate",
]

#: Trajectories whose state magnitude passes this bound are treated as divergent.
BLOWUP_BOUND = 1e6

#: g below this level counts as a collapse of f = g^2 toward the singularity.
G_FLOOR = 1e-9


@dataclass(frozen=True)
class Exact1dProblem:
    """Single-line setting: injection mean mu, rate gamma, volatility, lag tau.

    The decay rate is invariant under mu -> -mu (flip the noise), so
    computations use |mu| throughout; mu = 0 is rejected because the start
    then sits on the f = 0 singularity of the variational system.
    """

    mu: float
    gamma: float
    vol: float
    tau: float
    horizon: float

    def __post_init__(self):
        if not 0.0 < abs(self.mu) < 1.0:
            raise ValueError("mu must satisfy 0 < |mu| < 1")
        for name in ("gamma", "vol", "tau", "horizon"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be strictly positive")

    @property
    def level(self) -> float:
        """|mu|: the common initial value of g and of the current magnitude."""
        return abs(self.mu)


def functional_value(theta_path: TemperaturePath, problem: Exact1dProblem) -> float:
    """Action of a temperature path, by quadrature of the defining integrand.

    theta must be sampled on a uniform grid with at least three points; the
    derivatives are second-order finite differences. Raises NegativeRadicand
    when tau theta' + theta fails to stay positive, since the integrand takes
    its square root.
    """
    times = np.asarray(theta_path.times, dtype=float)
    theta = np.asarray(theta_path.values, dtype=float).reshape(times.shape[0], -1)[:, 0]
    if times.shape[0] < 3:
        raise ValueError("need at least three grid points")
    steps = np.diff(times)
    dt = float(steps[0])
    if not np.allclose(steps, dt, rtol=1e-9, atol=0.0):
        raise ValueError("grid must be uniform")

    def ddt(v):
        out = np.empty_like(v)
        out[1:-1] = (v[2:] - v[:-2]) / (2.0 * dt)
        out[0] = (-3.0 * v[0] + 4.0 * v[1] - v[2]) / (2.0 * dt)
        out[-1] = (3.0 * v[-1] - 4.0 * v[-2] + v[-3]) / (2.0 * dt)
        return out

    f = problem.tau * ddt(theta) + theta
    if np.min(f) <= 0.0:
        raise NegativeRadicand(
            f"tau*theta' + theta reaches {np.min(f):.3g}; the current magnitude is undefined"
        )
    g = np.sqrt(f)
    resid = (ddt(g) + problem.gamma * (g - problem.level)) / problem.vol
    return float(0.5 * np.trapezoid(resid**2, dx=dt))


def euler_residual(problem: Exact1dProblem, y, y_prime) -> np.ndarray:
    """Residual of the stationarity system at states y = [theta, f, f', f''].

    Accepts single states (shape (4,)) or stacked rows (n, 4); y_prime holds
    the time derivatives [theta', f', f'', f''']. Component 1 checks the
    definition f = tau theta' + theta, components 2 and 3 the chain
    consistency of the derivatives, and component 4 the quartic stationarity
    condition of the action.
    """
    y = np.atleast_2d(np.asarray(y, dtype=float))
    yp = np.atleast_2d(np.asarray(y_prime, dtype=float))
    if y.shape != yp.shape or y.shape[-1] != 4:
        raise ValueError("y and y_prime must both have four components")
    f = y[:, 1]
    if np.min(np.abs(f)) < 1e-12:
        raise DegenerateF("f vanished; the stationarity condition divides by f")
    tau, gam, mu = problem.tau, problem.gamma, problem.level
    d1, d2 = y[:, 2], y[:, 3]
    d3 = yp[:, 3]
    r = np.empty_like(y)
    r[:, 0] = y[:, 1] - tau * yp[:, 0] - y[:, 0]
    r[:, 1] = yp[:, 1] - y[:, 2]
    r[:, 2] = yp[:, 2] - y[:, 3]
    r[:, 3] = (
        4.0 * gam**2 * f**3
        + 2.0 * tau * f**2 * d3
        - 2.0 * f**2 * d2
        + f * d1**2
        - 4.0 * tau * f * d1 * d2
        + 2.0 * tau * d1**3
        - 2.0 * gam**2 * mu * f**1.5 * (2.0 * f + tau * d1)
    )
    return r[0] if r.shape[0] == 1 and np.asarray(y_prime).ndim == 1 else r


def _initial_from_shot(problem: Exact1dProblem, x1: float, x2: float):
    """Map (f'(0), f''(0)) to the reduced parameters (p0, E at horizon)."""
    a = problem.level
    p0 = x1 / (2.0 * a)
    e0 = (x2 - 2.0 * p0**2) / (4.0 * a**2)
    return p0, e0 * np.exp(problem.horizon / problem.tau)


def _shot_from_reduced(problem: Exact1dProblem, p0: float, e_end: float):
    a = problem.level
    e0 = e_end * np.exp(-problem.horizon / problem.tau)
    return 2.0 * a * p0, 2.0 * p0**2 + 4.0 * a**2 * e0


def _integrate(problem: Exact1dProblem, p0: float, e_end: float, rtol: float, atol: float):
    """Advance (theta, g, p, action) to the horizon; None marks an invalid shot."""
    tau, gam, a, T = problem.tau, problem.gamma, problem.level, problem.horizon
    l2 = problem.vol**2

    def rhs(t, u):
        th, g, p, _ = u
        forcing = 2.0 * e_end * np.exp((t - T) / tau) * g
        return (
            (g * g - th) / tau,
            p,
            gam * gam * (g - a) + forcing,
            0.5 * (p + gam * (g - a)) ** 2 / l2,
        )

    def collapse(t, u):
        return u[1] - G_FLOOR

    collapse.terminal = True

    def escape(t, u):
        return BLOWUP_BOUND - max(abs(u[1]), abs(u[2]))

    escape.terminal = True

    sol = solve_ivp(
        rhs,
        (0.0, T),
        (a * a, a, p0, 0.0),
        method="DOP853",
        rtol=rtol,
        atol=atol,
        events=(collapse, escape),
        dense_output=True,
    )
    if sol.status != 0:
        reason = "collapse" if sol.t_events[0].size else "escape"
        return None, reason
    return sol, None


@dataclass(frozen=True)
class ShotResult:
    """One integration of the stationarity system from given initial slopes.

    `states` rows are y = [theta, f, f', f''] on `times`, `state_derivs` their
    time derivatives; `value` is the accumulated action up to the horizon.
    """

    theta: TemperaturePath
    theta_end: float
    value: float
    times: np.ndarray
    states: np.ndarray
    state_derivs: np.ndarray


def _sample_states(problem: Exact1dProblem, sol, e_end: float, samples: int):
    tau, gam, a, T = problem.tau, problem.gamma, problem.level, problem.horizon
    t = np.linspace(0.0, T, samples + 1)
    th, g, p, cost = sol.sol(t)
    e = e_end * np.exp((t - T) / tau)
    gpp = gam**2 * (g - a) + 2.0 * e * g
    gppp = gam**2 * p + 2.0 * (e / tau) * g + 2.0 * e * p
    f = g**2
    fp = 2.0 * g * p
    fpp = 2.0 * p**2 + 2.0 * g * gpp
    fppp = 6.0 * p * gpp + 2.0 * g * gppp
    states = np.column_stack([th, f, fp, fpp])
    derivs = np.column_stack([(f - th) / tau, fp, fpp, fppp])
    return t, th, cost[-1], states, derivs


def shoot(
    problem: Exact1dProblem,
    x1: float,
    x2: float,
    samples: int = 400,
    rtol: float = 1e-10,
    atol: float = 1e-12,
) -> ShotResult:
    """Integrate the stationarity system from initial slopes (f'(0), f''(0)).

    Raises DegenerateF when the squared-current variable collapses to zero
    along the way and BlowUp when the trajectory escapes the bounding box.
    """
    p0, e_end = _initial_from_shot(problem, x1, x2)
    sol, reason = _integrate(problem, p0, e_end, rtol, atol)
    if sol is None:
        if reason == "collapse":
            raise DegenerateF("f collapsed to zero along the shot")
        raise BlowUp(f"trajectory left the |state| < {BLOWUP_BOUND:g} box")
    t, th, value, states, derivs = _sample_states(problem, sol, e_end, samples)
    return ShotResult(
        theta=TemperaturePath(t, th[:, None]),
        theta_end=float(th[-1]),
        value=float(value),
        times=t,
        states=states,
        state_derivs=derivs,
    )


def _solve_boundary(problem: Exact1dProblem, p0: float, e_bound: float):
    """Find E(T) with theta(T) = 1 for a fixed p0; None when no root exists.

    The bracket grows geometrically from zero forcing, downward when the
    unforced shot already overshoots, until the implied |f''(0)| would leave
    the search box or the trajectory stops being integrable.
    """

    def terminal_theta(e_end):
        sol, _ = _integrate(problem, p0, e_end, rtol=1e-9, atol=1e-11)
        return np.nan if sol is None else sol.y[0, -1] - 1.0

    def inside(e_end):
        return abs(_shot_from_reduced(problem, p0, e_end)[1]) <= e_bound

    lo, hi = 0.0, 0.5
    flo = terminal_theta(lo)
    if np.isnan(flo):
        return None
    fhi = terminal_theta(hi)
    for _ in range(80):
        if np.isnan(fhi) or flo * fhi <= 0:
            break
        if flo > 0:  # overshoots with no forcing: search damping E < 0
            hi, fhi = lo, flo
            lo = lo - 2.0 * max(0.5, abs(lo))
            if not inside(lo):
                return None
            flo = terminal_theta(lo)
            if np.isnan(flo):
                return None
        else:
            lo, flo = hi, fhi
            hi *= 2.0
            if not inside(hi):
                return None
            fhi = terminal_theta(hi)
    if np.isnan(fhi) or flo * fhi > 0:
        return None
    try:
        e_end = brentq(terminal_theta, lo, hi, xtol=1e-13, rtol=4 * np.finfo(float).eps)
    except ValueError:
        return None
    sol, _ = _integrate(problem, p0, e_end, rtol=1e-10, atol=1e-12)
    if sol is None:
        return None
    return e_end, float(sol.y[3, -1]), sol


@dataclass(frozen=True)
class Exact1dResult:
    """Minimal action over boundary-hitting shots, with the attaining shot."""

    value: float
    x1: float
    x2: float
    shot: ShotResult


def exact_decay_rate(
    problem: Exact1dProblem,
    search_box=((-50.0, 50.0), (-50.0, 50.0)),
    scan_points: int = 21,
    samples: int = 400,
) -> Exact1dResult:
    """Temperature overload decay rate by nested shooting.

    For each initial slope x1 on a coarse grid, the inner stage root-finds
    the forcing that lands theta exactly on the limit at the horizon; the
    outer stage then minimizes the resulting action over x1 inside the
    bracket around the best grid point. `search_box` bounds (x1, x2).
    """
    (x1_lo, x1_hi), (x2_lo, x2_hi) = search_box
    e_bound = max(abs(x2_lo), abs(x2_hi))
    a = problem.level
    # natural slope scale: reach the unit level from |mu| within the horizon
    scale = (1.0 - a) / problem.horizon
    lo = max(x1_lo, -4.0 * a * scale)
    hi = min(x1_hi, 16.0 * a * scale)
    if not lo < hi:
        lo, hi = x1_lo, x1_hi

    def boundary_action(x1):
        found = _solve_boundary(problem, x1 / (2.0 * a), e_bound)
        return np.inf if found is None else found[1]

    grid = np.linspace(lo, hi, scan_points)
    actions = np.array([boundary_action(x) for x in grid])
    if not np.any(np.isfinite(actions)):
        raise NoBoundaryHit(
            "no shot inside the search box reaches the overload level at the horizon"
        )
    k = int(np.argmin(actions))
    dx = grid[1] - grid[0]
    res = minimize_scalar(
        boundary_action,
        bounds=(max(lo, grid[k] - dx), min(hi, grid[k] + dx)),
        method="bounded",
        options={"xatol": 1e-6},
    )
    x1 = float(res.x) if res.fun <= actions[k] else float(grid[k])
    found = _solve_boundary(problem, x1 / (2.0 * a), e_bound)
    if found is None:
        raise NoBoundaryHit("refinement lost the boundary root")
    e_end, value, sol = found
    t, th, value, states, derivs = _sample_states(problem, sol, e_end, samples)
    x2 = _shot_from_reduced(problem, x1 / (2.0 * a), e_end)[1]
    shot = ShotResult(
        theta=TemperaturePath(t, th[:, None]),
        theta_end=float(th[-1]),
        value=float(value),
        times=t,
        states=states,
        state_derivs=derivs,
    )
    return Exact1dResult(value=float(value), x1=x1, x2=float(x2), shot=shot)
