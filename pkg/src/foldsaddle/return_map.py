"""Half-return maps, the first return map and canard cycles.

For the invisible family with ``beta > 0`` an upper orbit leaving ``(x0, 0)``
to the left of the fold comes back at ``gamma_x(x0)``, and a lower orbit
leaving ``(x1, 0)`` between the separatrix feet ``h`` and ``j`` comes back at
``gamma_y(x1)``.  Both maps are involutions.  The first return map is
``phi = gamma_y o gamma_x`` and its fixed points are canard cycles.
"""

from __future__ import annotations

import csv
import enum
import io
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.optimize import brentq, minimize_scalar

from .core import tolerances
from .errors import NoBracketError, NoReturnError, OutOfDomainError, ParameterError
from .normal_forms import FamilyParams, orbit_height_primitive, y_fold_x

__all__ = [
    "HalfMap", "Stability", "CanardCycle", "gamma_x", "gamma_y",
    "gamma_y_time", "half_map", "return_domain", "first_return",
    "return_derivative", "find_canard_cycles", "count_canard_cycles",
    "find_saddle_node", "sample_return_map", "return_map_to_csv",
]


# ---------------------------------------------------------------------------
# Half maps
# ---------------------------------------------------------------------------

def _gamma_x_values(lam, x):
    # Other root of F(u1) = F(u0) for F(u) = -u^2/2 + u^3/3 after dividing
    # out (u1 - u0); the orbit returns only for u0 in (-1/2, 1).
    u = np.asarray(x, dtype=float) - lam
    disc = 9.0 + 12.0 * u - 12.0 * u * u
    ok = (u > -0.5) & (u < 1.0)
    root = np.sqrt(np.where(ok, disc, np.nan))
    return lam + ((3.0 - 2.0 * u) - root) / 4.0


def _gamma_y_solve(alpha, beta, x):
    """Return abscissa and signed flight time of the lower orbit through ``x``."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    p0, q0 = x + beta, x - beta
    out = np.full(x.shape, np.nan)
    tout = np.full(x.shape, np.nan)
    inside = (p0 > 0) & (q0 < 0)
    slope = (alpha - 1.0) * x + (alpha + 1.0) * beta  # 2 Y.f on the line
    fix = inside & (slope == 0)
    out[fix], tout[fix] = x[fix], 0.0
    for mask, sgn in ((inside & (slope < 0), 1.0), (inside & (slope > 0), -1.0)):
        if not mask.any():
            continue
        P, Q = p0[mask], q0[mask]
        # g(t) = P e^{alpha t} - Q e^t - 2 beta, written without the trivial
        # root's cancellation; g is convex with its minimum at t_min.
        t_min = np.log(-alpha * P / -Q) / (1.0 - alpha)

        def g(t):
            return P * np.expm1(alpha * t) - Q * np.expm1(t)

        step = np.ones_like(t_min)
        t = t_min + sgn * step
        for _ in range(200):
            low = g(t) <= 0
            if not low.any():
                break
            step = np.where(low, 2.0 * step, step)
            t = np.where(low, t_min + sgn * step, t)
        # Newton from the far side converges monotonically on a convex branch
        for _ in range(200):
            gp = alpha * P * np.exp(alpha * t) - Q * np.exp(t)
            dt = g(t) / gp
            t = t - dt
            if np.all(np.abs(dt) <= 1e-15 * (1.0 + np.abs(t))):
                break
        out[mask] = 0.5 * (P * np.exp(alpha * t) + Q * np.exp(t))
        tout[mask] = t
    return out, tout


def _check_inv(params):
    if params.tau != "inv":
        raise ParameterError("half-return maps need tau = 'inv'")


def _scalar_or_array(values, x, what):
    if np.ndim(x) == 0:
        v = float(np.asarray(values).reshape(-1)[0])
        if not math.isfinite(v):
            raise NoReturnError(f"{what}: no return from x = {x}")
        return v
    return values


def gamma_x(params: FamilyParams, x0):
    """Return point of the upper orbit leaving ``(x0, 0)``.

    Closed form: with ``u = x0 - lam``, ``gamma_x = lam + ((3 - 2u) -
    sqrt(9 + 12u - 12u**2)) / 4``, defined for ``u`` in ``(-1/2, 1)``.

    Parameters
    ----------
    params : FamilyParams
        Must have ``tau = 'inv'``.
    x0 : float or array_like
        Arrays return ``nan`` outside the domain.

    Raises
    ------
    NoReturnError
        Scalar ``x0`` outside the domain interval.
    """
    _check_inv(params)
    return _scalar_or_array(_gamma_x_values(params.lam, x0), x0, "gamma_x")


def gamma_y(params: FamilyParams, x0):
    """Return point of the lower orbit through ``(x0, 0)``.

    Solves ``(x0 + beta) e^{alpha t} - (x0 - beta) e^t = 2 beta`` for the
    non-trivial root ``t`` and returns ``(p(t) + q(t)) / 2``.  The root is
    positive when ``Y`` points downwards at ``x0`` and negative otherwise;
    the fold ``i`` is fixed.

    Raises
    ------
    ParameterError
        If ``beta <= 0``.
    NoReturnError
        Scalar ``x0`` outside ``(-beta, beta)``.
    """
    if not params.beta > 0:
        raise ParameterError("gamma_y needs beta > 0")
    vals, _ = _gamma_y_solve(params.alpha, params.beta, x0)
    if np.ndim(x0) == 0:
        return _scalar_or_array(vals, x0, "gamma_y")
    return vals.reshape(np.shape(x0))


def gamma_y_time(params: FamilyParams, x0: float) -> float:
    """Signed flight time of the lower orbit between ``x0`` and ``gamma_y(x0)``."""
    vals, times = _gamma_y_solve(params.alpha, params.beta, x0)
    if not math.isfinite(vals[0]):
        raise NoReturnError(f"gamma_y: no return from x = {x0}")
    return float(times[0])


@dataclass(frozen=True)
class HalfMap:
    """A half-return map with its open domain interval."""

    owner: str
    params: FamilyParams
    domain_interval: tuple

    def __call__(self, x):
        f = gamma_x if self.owner == "X" else gamma_y
        return f(self.params, x)


def half_map(params: FamilyParams, owner: str) -> HalfMap:
    """Build the half map of ``X`` (``owner='X'``) or ``Y`` (``owner='Y'``)."""
    if owner == "X":
        _check_inv(params)
        return HalfMap("X", params, (params.lam - 0.5, params.lam + 1.0))
    if owner == "Y":
        if not params.beta > 0:
            raise ParameterError("gamma_y needs beta > 0")
        return HalfMap("Y", params, (-params.beta, params.beta))
    raise ParameterError("owner must be 'X' or 'Y'")


# ---------------------------------------------------------------------------
# First return map
# ---------------------------------------------------------------------------

def return_domain(params: FamilyParams) -> Optional[tuple]:
    """Open interval of ``x0 < lam`` on which ``phi`` is a return map.

    ``x1 = gamma_x(x0)`` must lie strictly between the fold ``i`` of ``Y``
    (so that ``Y`` carries it downwards) and ``j = beta`` (beyond which the
    lower orbit escapes along the unstable separatrix).  Because
    ``gamma_x`` is a decreasing involution both conditions translate into
    bounds on ``x0``.  Returns ``None`` when the interval is empty.
    """
    _check_inv(params)
    lam, beta = params.lam, params.beta
    if not beta > 0:
        return None
    i1 = y_fold_x(params.alpha, beta)
    if beta <= lam:
        return None
    lo = lam - 0.5 if beta - lam >= 1.0 else float(_gamma_x_values(lam, beta))
    if i1 <= lam:
        hi = lam
    elif i1 - lam < 1.0:
        hi = float(_gamma_x_values(lam, i1))
    else:
        return None
    return (lo, hi) if hi > lo else None


def _phi_values(params, x):
    x1 = _gamma_x_values(params.lam, x)
    vals, _ = _gamma_y_solve(params.alpha, params.beta, x1)
    return vals.reshape(np.shape(x1))


def first_return(params: FamilyParams, x0):
    """First return map ``phi(x0) = gamma_y(gamma_x(x0))``.

    Raises
    ------
    NoReturnError
        Scalar ``x0`` outside :func:`return_domain`.
    """
    _check_inv(params)
    dom = return_domain(params)
    x = np.asarray(x0, dtype=float)
    ok = np.zeros(x.shape, bool) if dom is None else (x > dom[0]) & (x < dom[1])
    vals = np.where(ok, _phi_values(params, np.where(ok, x, params.lam - 0.25)), np.nan)
    if np.ndim(x0) == 0:
        if not ok:
            raise NoReturnError(f"x0 = {x0} outside the return domain {dom}")
        return float(vals)
    return vals


def return_derivative(params: FamilyParams, x0: float, h: float = 1e-6) -> float:
    """``phi'(x0)`` by central differences with one Richardson step.

    Raises
    ------
    OutOfDomainError
        If the stencil ``[x0 - h, x0 + h]`` leaves the return domain.
    """
    dom = return_domain(params)
    if dom is None or not (dom[0] < x0 - h and x0 + h < dom[1]):
        raise OutOfDomainError(f"stencil around {x0} leaves the return domain {dom}")
    xs = np.array([x0 - h, x0 + h, x0 - h / 2, x0 + h / 2])
    f = _phi_values(params, xs)
    d1 = (f[1] - f[0]) / (2 * h)
    d2 = (f[3] - f[2]) / h
    return float((4.0 * d2 - d1) / 3.0)


# ---------------------------------------------------------------------------
# Canard cycles
# ---------------------------------------------------------------------------

class Stability(str, enum.Enum):
    ATTRACTOR = "Attractor"
    REPELLER = "Repeller"
    NON_HYPERBOLIC = "NonHyperbolic"


def _stability(m: float) -> Stability:
    if abs(m - 1.0) <= tolerances().hyperbolic:
        return Stability.NON_HYPERBOLIC
    return Stability.ATTRACTOR if m < 1.0 else Stability.REPELLER


@dataclass(frozen=True, eq=False)
class CanardCycle:
    """Fixed point of the first return map.

    Attributes
    ----------
    fixed_x : float
        Left crossing point ``x*`` on the switching line.
    x_return : float
        ``gamma_x(x*)``, the right crossing point.
    multiplier : float
        ``phi'(x*)``.
    stability : Stability
    polyline : ndarray, shape (n, 2)
        Closed curve: the upper arc from ``x*`` to ``x_return`` followed by
        the lower arc back to ``x*``.
    """

    fixed_x: float
    x_return: float
    multiplier: float
    stability: Stability
    polyline: np.ndarray

    def to_dict(self) -> dict:
        return {"fixed_x": self.fixed_x, "x_return": self.x_return,
                "multiplier": self.multiplier, "stability": self.stability.value}


def cycle_polyline(params: FamilyParams, x0: float, n: int = 200) -> np.ndarray:
    """Polyline of the closed curve through ``(x0, 0)`` and ``(gamma_x(x0), 0)``."""
    x1 = gamma_x(params, x0)
    xs = np.linspace(x0, x1, n)
    ys = (orbit_height_primitive("inv", xs - params.lam)
          - orbit_height_primitive("inv", x0 - params.lam))
    ys[0] = ys[-1] = 0.0
    t_end = gamma_y_time(params, x1)
    ts = np.linspace(0.0, t_end, n)
    p = (x1 + params.beta) * np.exp(params.alpha * ts)
    q = (x1 - params.beta) * np.exp(ts)
    lower = np.column_stack([(p + q) / 2.0, (p - q) / 2.0 - params.beta])
    lower[0, 1] = 0.0
    return np.vstack([np.column_stack([xs, ys]), lower[1:]])


def _clustered_grid(lo, hi, n):
    k = np.arange(n)
    return lo + (hi - lo) * 0.5 * (1.0 - np.cos(np.pi * (k + 0.5) / n))


def _edge_h(dom, x, h=1e-6):
    gap = min(x - dom[0], dom[1] - x)
    return min(h, 0.25 * gap)


def _scan_roots(params, n):
    """Sign-change roots and tangential minima of ``phi(x) - x``."""
    dom = return_domain(params)
    if dom is None:
        return dom, [], []
    xs = _clustered_grid(dom[0], dom[1], n)
    g = _phi_values(params, xs) - xs
    fin = np.isfinite(g)
    xs, g = xs[fin], g[fin]

    def gs(x):
        return float(_phi_values(params, np.array([x]))[0] - x)

    roots = [float(x) for x in xs[g == 0.0]]
    for k in np.nonzero(g[:-1] * g[1:] < 0)[0]:
        a, b = xs[k], xs[k + 1]
        ga, gb = gs(a), gs(b)
        if ga * gb > 0:
            # scalar and batched solves disagree in the last bits: the root
            # sits on a grid point
            roots.append(float(a if abs(ga) < abs(gb) else b))
        elif ga == 0.0 or gb == 0.0:
            roots.append(float(a if ga == 0.0 else b))
        else:
            roots.append(brentq(gs, a, b, xtol=1e-15, rtol=4 * np.finfo(float).eps))
    touches = []
    ag = np.abs(g)
    for k in range(1, g.size - 1):
        if g[k - 1] * g[k] > 0 and g[k] * g[k + 1] > 0 and ag[k] < ag[k - 1] and ag[k] <= ag[k + 1]:
            s = math.copysign(1.0, g[k])
            res = minimize_scalar(lambda x: s * gs(x), bounds=(xs[k - 1], xs[k + 1]),
                                  method="bounded", options={"xatol": 1e-13})
            touches.append((float(res.x), abs(float(res.fun))))
    return dom, sorted(roots), touches


_TOUCH_TOL = 1e-11


def count_canard_cycles(params: FamilyParams, n: int = 4000) -> int:
    """Number of sign changes of ``phi(x) - x`` on a clustered grid (fast)."""
    dom = return_domain(params)
    if dom is None:
        return 0
    xs = _clustered_grid(dom[0], dom[1], n)
    g = _phi_values(params, xs) - xs
    g = g[np.isfinite(g)]
    return int(np.count_nonzero(g[:-1] * g[1:] < 0))


def find_canard_cycles(params: FamilyParams, n: int = 10_000, polyline_points: int = 200):
    """All canard cycles of the invisible family, outermost first.

    Fixed points of ``phi`` are bracketed by sign changes of ``phi(x) - x``
    on a grid of ``n`` points clustered towards the ends of the return
    domain, then polished with Brent's method.  A tangential contact with
    the diagonal (``|phi - x| <= 1e-11`` at a local extremum), or two roots
    closer than ``1e-6`` whose multipliers both lie within ``1e-3`` of one,
    are reported as one non-hyperbolic cycle.  Roots within ``1e-7`` of the
    domain width from its ends, near-unit-multiplier roots within ``1e-4``
    and contacts within ``1e-3`` are the fold point or the loop through the
    saddle and are not cycles.

    Returns
    -------
    list of CanardCycle
        Sorted by ``fixed_x``; the first entry is the largest cycle.
    """
    _check_inv(params)
    if not params.beta > 0:
        return []
    dom, roots, touches = _scan_roots(params, n)
    if dom is None:
        return []
    found = []
    width = dom[1] - dom[0]
    for x in roots:
        # the ends of the domain are fixed by construction at a loop or a fold
        gap = min(x - dom[0], dom[1] - x)
        if gap < 1e-7 * width:
            continue
        m = return_derivative(params, x, _edge_h(dom, x))
        # phi is tangent to the diagonal at a fold end when d = i
        if gap < 1e-4 * width and abs(m - 1.0) < 1e-3:
            continue
        found.append([x, m])
    edge = 1e-3 * width
    for x, val in touches:
        # contacts at the domain ends are the fold or the separatrix loop
        if min(x - dom[0], dom[1] - x) < edge:
            continue
        if val <= _TOUCH_TOL and all(abs(x - r) > 1e-6 for r in roots):
            found.append([x, 1.0])
    found.sort()
    merged = []
    for x, m in found:
        if merged and abs(x - merged[-1][0]) < 1e-6 and abs(m - 1) < 1e-3 and abs(merged[-1][1] - 1) < 1e-3:
            px, pm = merged.pop()
            merged.append([0.5 * (x + px), 1.0])
            continue
        merged.append([x, m])
    cycles = []
    for x, m in merged:
        stab = Stability.NON_HYPERBOLIC if m == 1.0 else _stability(m)
        cycles.append(CanardCycle(x, gamma_x(params, x), m, stab,
                                  cycle_polyline(params, x, polyline_points)))
    return cycles


# ---------------------------------------------------------------------------
# Saddle-node of canard cycles
# ---------------------------------------------------------------------------

def _interior_extremum(params, sign, n=4000):
    """``min sign*(phi(x) - x)`` away from the ends of the return domain."""
    dom = return_domain(params)
    if dom is None:
        return math.nan
    xs = _clustered_grid(dom[0], dom[1], n)
    g = sign * (_phi_values(params, xs) - xs)
    k = int(np.nanargmin(g))
    k = min(max(k, 1), xs.size - 2)

    def gs(x):
        return float(sign * (_phi_values(params, np.array([x]))[0] - x))

    res = minimize_scalar(gs, bounds=(xs[k - 1], xs[k + 1]), method="bounded",
                          options={"xatol": 1e-14})
    return float(min(res.fun, g[k]))


def _edge_signs(params, n=4000):
    dom = return_domain(params)
    if dom is None:
        return None
    xs = _clustered_grid(dom[0], dom[1], n)
    g = _phi_values(params, xs) - xs
    g = g[np.isfinite(g)]
    return (math.copysign(1.0, g[0]), math.copysign(1.0, g[-1])) if g.size else None


def _lambda_grid(alpha, beta, n):
    base = np.linspace(-beta, beta, n + 2)[1:-1]
    m1 = -0.5 + math.sqrt(max(9.0 - 12.0 * beta * beta, 0.0)) / 6.0
    i1 = y_fold_x(alpha, beta)
    extra = [c + beta * np.linspace(-0.1, 0.1, n // 2) for c in (m1, i1)]
    lams = np.unique(np.concatenate([base] + extra))
    return lams[(lams > -beta) & (lams < beta)]


def find_saddle_node(alpha: float, beta: float, n_lambda: int = 200,
                     lam_tol: float = 1e-13) -> float:
    """Value of ``lambda`` at which two canard cycles collide.

    The number of cycles is sampled on a grid of ``lambda`` (denser around
    the loop value and the fold-fold value).  At a sample with two cycles,
    ``phi - x`` has one sign between the two fixed points and the opposite
    sign at both ends of the domain; a neighbouring sample without cycles
    and with the same end signs brackets the collision.  The collision value
    is the zero of the interior extremum of ``phi - x``, found by Brent's
    method on ``lambda``.

    Raises
    ------
    NoBracketError
        If no two-cycle window is found.
    """
    if not beta > 0:
        raise ParameterError("saddle-node search needs beta > 0")
    lams = _lambda_grid(alpha, beta, n_lambda)
    mk = lambda lam: FamilyParams.from_alpha("inv", lam, beta, alpha)  # noqa: E731
    counts = np.array([count_canard_cycles(mk(lam)) for lam in lams])
    two = np.nonzero(counts >= 2)[0]
    if two.size == 0:
        raise NoBracketError(f"no two-cycle window for alpha={alpha}, beta={beta}")
    for k in two:
        p2 = mk(lams[k])
        signs = _edge_signs(p2)
        if signs is None or signs[0] != signs[1]:
            continue
        sign = -signs[0]  # sign of phi - x between the two cycles, negated below
        for nb in (k - 1, k + 1):
            if nb < 0 or nb >= lams.size or counts[nb] != 0:
                continue
            pn = mk(lams[nb])
            if _edge_signs(pn) != signs:
                continue

            def ext(lam):
                return _interior_extremum(mk(lam), -sign)

            a, b = lams[k], lams[nb]
            fa, fb = ext(a), ext(b)
            if not (fa < 0 < fb or fb < 0 < fa):
                continue
            return float(brentq(ext, min(a, b), max(a, b), xtol=lam_tol,
                                rtol=4 * np.finfo(float).eps))
    raise NoBracketError(f"no saddle-node bracket for alpha={alpha}, beta={beta}")


# ---------------------------------------------------------------------------
# Sampling
# ---------------------------------------------------------------------------

def sample_return_map(params: FamilyParams, n: int = 200):
    """Samples ``(x, phi(x), phi'(x))`` on the interior of the return domain.

    Raises
    ------
    NoReturnError
        If the return domain is empty.
    """
    dom = return_domain(params)
    if dom is None:
        raise NoReturnError("empty return domain")
    xs = _clustered_grid(dom[0], dom[1], n)
    phi = _phi_values(params, xs)
    dphi = np.array([return_derivative(params, x, _edge_h(dom, x)) for x in xs])
    return xs, phi, dphi


def return_map_to_csv(xs, phi, dphi) -> str:
    """CSV text with columns ``x, phi, phi'``."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["x", "phi", "phi'"])
    for row in zip(xs, phi, dphi):
        w.writerow([repr(float(v)) for v in row])
    return buf.getvalue()
