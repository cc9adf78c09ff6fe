"""Event-driven integration of Filippov trajectories.

Free motion is integrated with an embedded Runge-Kutta pair stepped by
hand, so that every step can be checked for a hit of the switching line
``y = 0``; hits are refined by bisection on the dense output.  Motion on the
switching line follows the scalar sliding flow ``x' = H(x)``.
"""

from __future__ import annotations

import csv
import enum
import io
import json
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.integrate import DOP853, RK45, solve_ivp
from scipy.optimize import brentq

from .core import (
    NsvfSystem,
    SmoothField,
    Visibility,
    _visibility,
    direction_function,
    tolerances,
)
from .errors import EscapingStartError, NoBracketError, OutOfDomainError, ParameterError, RegionError
from .normal_forms import orbit_height_primitive, y_fold_x

__all__ = [
    "Regime", "Termination", "OrbitSegment", "Trajectory", "integrate_free",
    "advance", "slide", "find_connection_lambda", "connection_endpoints",
    "trajectory_to_csv", "trajectory_events_json",
]

_SOLVERS = {"RK45": RK45, "DOP853": DOP853}


class Regime(str, enum.Enum):
    FREE_X = "FreeX"
    FREE_Y = "FreeY"
    SLIDING = "Sliding"


class Termination(str, enum.Enum):
    HIT_SIGMA = "HitSigma"
    LEFT_DOMAIN = "LeftDomain"
    TIME_BUDGET = "TimeBudget"
    REACHED_PSEUDO_EQUILIBRIUM = "ReachedPseudoEquilibrium"
    REACHED_FOLD = "ReachedFold"
    NUMERICAL_FAILURE = "NumericalFailure"


@dataclass(frozen=True, eq=False)
class OrbitSegment:
    """Time-stamped polyline travelled in one regime.

    Attributes
    ----------
    points : ndarray, shape (n, 3)
        Rows ``(t, x, y)`` with strictly increasing (or, for backward
        integration, strictly decreasing) ``t``.
    regime : Regime
    termination : Termination
    where : float or None
        Abscissa of the terminal point for ``HitSigma``, ``ReachedFold`` and
        ``ReachedPseudoEquilibrium``.
    """

    points: np.ndarray
    regime: Regime
    termination: Termination
    where: Optional[float] = None

    @property
    def start(self):
        return tuple(self.points[0, 1:])

    @property
    def end(self):
        return tuple(self.points[-1, 1:])

    @property
    def t_end(self) -> float:
        return float(self.points[-1, 0])


@dataclass(eq=False)
class Trajectory:
    """Concatenation of orbit segments with the events joining them.

    ``events`` holds ``(t, kind, x)`` tuples where ``kind`` is one of
    ``"crossing"``, ``"sliding_entry"``, ``"sliding_exit"``, ``"tangency"``
    or ``"pseudo_equilibrium"``.
    """

    segments: list = field(default_factory=list)
    events: list = field(default_factory=list)

    @property
    def termination(self) -> Optional[Termination]:
        return self.segments[-1].termination if self.segments else None

    @property
    def end(self):
        return self.segments[-1].end

    def points(self) -> np.ndarray:
        """All samples as rows ``(t, x, y)``, junctions not repeated."""
        if not self.segments:
            return np.empty((0, 3))
        parts = [self.segments[0].points] + [s.points[1:] for s in self.segments[1:]]
        return np.vstack(parts)


# ---------------------------------------------------------------------------
# Free motion
# ---------------------------------------------------------------------------

def _bisect_time(g, t_lo, t_hi, tol):
    """Refine a sign change of ``g`` (``g(t_lo) >= 0 > g(t_hi)``)."""
    for _ in range(200):
        t_mid = 0.5 * (t_lo + t_hi)
        g_mid = g(t_mid)
        if abs(g_mid) <= tol and g_mid >= 0:
            return t_mid
        if g_mid >= 0:
            t_lo = t_mid
        else:
            t_hi = t_mid
        if abs(t_hi - t_lo) <= 4 * np.finfo(float).eps * (1.0 + abs(t_lo)):
            break
    return t_lo if g(t_lo) <= tol else t_hi


def integrate_free(fld: SmoothField, start, half: str, t_max: float, *,
                   domain=(-1.5, 1.5, -1.5, 1.5), method: str = "RK45",
                   backward: bool = False, max_step: float = np.inf) -> OrbitSegment:
    """Integrate one smooth field until it hits ``y = 0`` or leaves the domain.

    Parameters
    ----------
    fld : SmoothField
    start : tuple of float
        Starting point; must lie in the closed half-plane ``half``.
    half : {"upper", "lower"}
    t_max : float
        Time budget (positive).
    domain : tuple
        ``(x_min, x_max, y_min, y_max)``.
    method : {"RK45", "DOP853"}
    backward : bool
        Integrate in reverse time.

    Returns
    -------
    OrbitSegment
        Regime ``FreeX`` for the upper half and ``FreeY`` for the lower one.
        A start on the line whose orbit immediately enters the other half
        terminates at once with ``HitSigma``.
    """
    tol = tolerances()
    if half not in ("upper", "lower"):
        raise ParameterError("half must be 'upper' or 'lower'")
    side = 1.0 if half == "upper" else -1.0
    regime = Regime.FREE_X if half == "upper" else Regime.FREE_Y
    x0, y0 = float(start[0]), float(start[1])
    if side * y0 < -tol.event:
        raise OutOfDomainError(f"start {start} is not in the {half} half-plane")
    xmin, xmax, ymin, ymax = domain
    sgn = -1.0 if backward else 1.0

    def fun(t, z):
        v1, v2 = fld(z[0], z[1])
        return np.array([sgn * float(v1), sgn * float(v2)])

    solver = _SOLVERS[method](fun, 0.0, np.array([x0, y0]), t_bound=t_max,
                              rtol=tol.rtol, atol=tol.atol, max_step=max_step)
    rows = [(0.0, x0, y0)]
    on_line = abs(y0) <= tol.event

    def outside(z):
        return max(xmin - z[0], z[0] - xmax, ymin - z[1], z[1] - ymax)

    def finish(term, where=None):
        pts = np.array(rows)
        pts[:, 0] *= sgn
        return OrbitSegment(pts, regime, term, where)

    while solver.status == "running":
        t_old = solver.t
        solver.step()
        if solver.status == "failed":
            return finish(Termination.NUMERICAL_FAILURE)
        dense = solver.dense_output()
        ts = np.linspace(t_old, solver.t, 9)
        zs = dense(ts)
        g = side * zs[1]
        # first sample (after the step start) that is on the wrong side
        bad = np.nonzero(g[1:] < 0)[0]
        if bad.size:
            k = bad[0] + 1
            if on_line and t_old == 0.0 and k == 1 and g[0] <= tol.event:
                return finish(Termination.HIT_SIGMA, x0)
            t_hit = _bisect_time(lambda s: side * dense(s)[1], ts[k - 1], ts[k], tol.event)
            z = dense(t_hit)
            if outside(z) > 0:
                bad = np.array([])  # domain exit happens first; handled below
            else:
                rows.extend((float(t), float(a), float(b))
                            for t, a, b in zip(ts[1:k], zs[0, 1:k], zs[1, 1:k])
                            if t < t_hit)
                rows.append((float(t_hit), float(z[0]), 0.0))
                return finish(Termination.HIT_SIGMA, float(z[0]))
        out = np.array([outside(zs[:, i]) for i in range(ts.size)])
        if np.any(out[1:] > 0):
            k = int(np.nonzero(out[1:] > 0)[0][0]) + 1
            t_out = _bisect_time(lambda s: -outside(dense(s)), ts[k - 1], ts[k], tol.event)
            z = dense(t_out)
            rows.append((float(t_out), float(z[0]), float(z[1])))
            return finish(Termination.LEFT_DOMAIN)
        rows.append((float(solver.t), float(solver.y[0]), float(solver.y[1])))
        if side * solver.y[1] > tol.event:
            on_line = False
    return finish(Termination.TIME_BUDGET)


# ---------------------------------------------------------------------------
# Sliding motion
# ---------------------------------------------------------------------------

def slide(Z: NsvfSystem, x0: float, t_max: float) -> OrbitSegment:
    """Integrate the sliding flow ``x' = H(x)`` along the switching line.

    Stops at an endpoint of the sliding or escaping interval (a zero of
    ``X.f`` or ``Y.f``), when ``|H| < slide_stop`` (pseudo-equilibrium), when
    the domain is left, or when ``t_max`` is exhausted.

    Raises
    ------
    RegionError
        If ``(x0, 0)`` is not a sliding or escaping point.
    """
    tol = tolerances()
    xf = float(Z.upper.lie(x0, 0.0, 1))
    yf = float(Z.lower.lie(x0, 0.0, 1))
    if not xf * yf < 0:
        raise RegionError(f"x0 = {x0} is not in a sliding or escaping region")
    if abs(direction_function(Z, x0)) < tol.slide_stop:
        pts = np.array([[0.0, x0, 0.0]])
        return OrbitSegment(pts, Regime.SLIDING, Termination.REACHED_PSEUDO_EQUILIBRIUM, x0)
    xmin, xmax = Z.domain[0], Z.domain[1]

    def rhs(t, s):
        return [direction_function(Z, s[0])]

    def ev_xf(t, s):
        return float(Z.upper.lie(s[0], 0.0, 1))

    def ev_yf(t, s):
        return float(Z.lower.lie(s[0], 0.0, 1))

    def ev_stop(t, s):
        return abs(direction_function(Z, s[0])) - tol.slide_stop

    def ev_lo(t, s):
        return s[0] - xmin

    def ev_hi(t, s):
        return xmax - s[0]

    events = [ev_xf, ev_yf, ev_stop, ev_lo, ev_hi]
    for e in events:
        e.terminal = True
    sol = solve_ivp(rhs, (0.0, t_max), [x0], method="LSODA", rtol=tol.rtol,
                    atol=tol.atol, events=events)
    pts = np.column_stack([sol.t, sol.y[0], np.zeros_like(sol.t)])
    if sol.status == -1:
        return OrbitSegment(pts, Regime.SLIDING, Termination.NUMERICAL_FAILURE)
    if sol.status == 0:
        return OrbitSegment(pts, Regime.SLIDING, Termination.TIME_BUDGET)
    for k, te in enumerate(sol.t_events):
        if te.size:
            x_end = float(sol.y_events[k][0][0])
            if k in (0, 1):
                term = Termination.REACHED_FOLD
            elif k == 2:
                term = Termination.REACHED_PSEUDO_EQUILIBRIUM
            else:
                term = Termination.LEFT_DOMAIN
            return OrbitSegment(pts, Regime.SLIDING, term, x_end)
    return OrbitSegment(pts, Regime.SLIDING, Termination.TIME_BUDGET)


# ---------------------------------------------------------------------------
# Filippov trajectories
# ---------------------------------------------------------------------------

_DIRECTIVES = ("go-up", "go-down", "slide")


def _decide(Z: NsvfSystem, x: float, heading: float):
    """Next regime for a point ``(x, 0)`` of the switching line.

    Returns ``(regime, x)`` where ``x`` may have been nudged off a non-generic
    contact point in the direction ``heading``, or ``(None, x)`` if the point
    is an escaping one or a double tangency.
    """
    tol = tolerances()
    nudge = 1e-9 * Z.width
    for _ in range(4):
        d1, d2 = (float(v) for v in Z.upper(x, 0.0))
        e1, e2 = (float(v) for v in Z.lower(x, 0.0))
        tx = abs(d2) <= tol.tangency * (1.0 + max(abs(d1), abs(d2)))
        ty = abs(e2) <= tol.tangency * (1.0 + max(abs(e1), abs(e2)))
        if tx and ty:
            return None, x
        if tx:
            vis = _visibility(float(Z.upper.lie(x, 0.0, 2)), "X")
            if vis is Visibility.VISIBLE:
                return Regime.FREE_X, x
            x += nudge * (heading if heading else math.copysign(1.0, d1))
            continue
        if ty:
            vis = _visibility(float(Z.lower.lie(x, 0.0, 2)), "Y")
            if vis is Visibility.VISIBLE:
                return Regime.FREE_Y, x
            x += nudge * (heading if heading else math.copysign(1.0, e1))
            continue
        if d2 > 0 and e2 > 0:
            return Regime.FREE_X, x
        if d2 < 0 and e2 < 0:
            return Regime.FREE_Y, x
        if d2 < 0 < e2:
            return Regime.SLIDING, x
        return None, x
    return None, x


def advance(Z: NsvfSystem, start, t_max: float, directive: Optional[str] = None,
            *, method: str = "RK45", max_segments: int = 2000) -> Trajectory:
    """Forward Filippov trajectory from ``start``.

    Crossing points switch the active field, sliding points start the
    sliding flow, and the sliding flow leaves the line at a fold endpoint
    along the field that becomes tangent there.  Trajectories stop at
    pseudo-equilibria, at double tangencies, on leaving the domain, or when
    the time budget is spent.

    Parameters
    ----------
    Z : NsvfSystem
    start : tuple of float
    t_max : float
    directive : {"go-up", "go-down", "slide"}, optional
        Branch to follow from an escaping start point.

    Raises
    ------
    EscapingStartError
        If ``start`` is an escaping point and no directive is given.
    OutOfDomainError
        If ``start`` is outside the domain.
    """
    tol = tolerances()
    x, y = float(start[0]), float(start[1])
    if not Z.contains(x, y):
        raise OutOfDomainError(f"start {start} outside the domain")
    if directive is not None and directive not in _DIRECTIVES:
        raise ParameterError(f"directive must be one of {_DIRECTIVES}")
    traj = Trajectory()
    t = 0.0
    heading = 0.0
    first = True
    for _ in range(max_segments):
        budget = t_max - t
        if budget <= 0:
            break
        if abs(y) <= tol.event:
            y = 0.0
            regime, x_new = _decide(Z, x, heading)
            if x_new != x:
                traj.events.append((t, "tangency", x))
                x = x_new
            if regime is None:
                xf = float(Z.upper.lie(x, 0.0, 1))
                yf = float(Z.lower.lie(x, 0.0, 1))
                if xf > 0 > yf and first:
                    if directive is None:
                        raise EscapingStartError(
                            f"({x}, 0) is an escaping point; give a directive")
                    regime = {"go-up": Regime.FREE_X, "go-down": Regime.FREE_Y,
                              "slide": Regime.SLIDING}[directive]
                else:
                    traj.events.append((t, "tangency", x))
                    pts = np.array([[t, x, 0.0]])
                    traj.segments.append(OrbitSegment(pts, Regime.SLIDING,
                                                      Termination.REACHED_FOLD, x))
                    return traj
        else:
            regime = Regime.FREE_X if y > 0 else Regime.FREE_Y
        first = False
        if regime is Regime.SLIDING:
            seg = slide(Z, x, budget)
        else:
            fld = Z.upper if regime is Regime.FREE_X else Z.lower
            half = "upper" if regime is Regime.FREE_X else "lower"
            seg = integrate_free(fld, (x, y), half, budget, domain=Z.domain, method=method)
        pts = seg.points.copy()
        pts[:, 0] += t
        seg = OrbitSegment(pts, seg.regime, seg.termination, seg.where)
        traj.segments.append(seg)
        t = seg.t_end
        x, y = seg.end
        term = seg.termination
        if term is Termination.HIT_SIGMA:
            y = 0.0
            fld = Z.upper if regime is Regime.FREE_X else Z.lower
            heading = math.copysign(1.0, float(fld(x, 0.0)[0]))
            nxt, _ = _decide(Z, x, heading)
            kind = {Regime.SLIDING: "sliding_entry", None: "tangency"}.get(nxt, "crossing")
            traj.events.append((t, kind, x))
        elif term is Termination.REACHED_FOLD:
            y = 0.0
            heading = 0.0
            if seg.points.shape[0] > 1:
                heading = math.copysign(1.0, seg.points[-1, 1] - seg.points[-2, 1])
            traj.events.append((t, "sliding_exit", x))
        elif term is Termination.REACHED_PSEUDO_EQUILIBRIUM:
            traj.events.append((t, "pseudo_equilibrium", x))
            return traj
        else:
            return traj
    return traj


# ---------------------------------------------------------------------------
# Connections of the upper field
# ---------------------------------------------------------------------------

def connection_endpoints(alpha: float, beta: float, pair: str):
    """Source and target abscissae of a connection ``h->i``, ``h->j`` or ``i->j``."""
    pts = {"h": -beta, "i": y_fold_x(alpha, beta), "j": beta}
    try:
        src, dst = pair.replace("→", "->").split("->")
        return pts[src.strip()], pts[dst.strip()]
    except (KeyError, ValueError):
        raise ParameterError(f"unknown connection {pair!r}") from None


def _arc_is_valid(tau, lam, src, dst, n=2001):
    # The upper orbit must leave src upwards and stay above the line until dst.
    if not dst > src:
        return False
    xs = np.linspace(src, dst, n)[1:-1]
    heights = orbit_height_primitive(tau, xs - lam) - orbit_height_primitive(tau, src - lam)
    return bool(np.all(heights > 0))


def find_connection_lambda(alpha: float, beta: float, pair: str, tau: str = "inv",
                           n_scan: int = 4001) -> float:
    """Value of ``lambda`` at which an upper orbit joins two points of the line.

    Solves ``F(target - lam) = F(source - lam)`` for ``lam`` in ``(-1, 1)``
    by bracketing on a grid followed by Brent's method, keeping only roots
    whose arc leaves the source upwards and first returns at the target.

    Raises
    ------
    ParameterError
        If ``beta <= 0``.
    NoBracketError
        If no valid root exists in ``(-1, 1)``.
    """
    if not beta > 0:
        raise ParameterError("connections need beta > 0")
    src, dst = connection_endpoints(alpha, beta, pair)

    def gap(lam):
        return orbit_height_primitive(tau, dst - lam) - orbit_height_primitive(tau, src - lam)

    grid = np.linspace(-1.0, 1.0, n_scan)
    vals = gap(grid)
    roots = []
    for k in np.nonzero(np.sign(vals[:-1]) * np.sign(vals[1:]) <= 0)[0]:
        a, b = grid[k], grid[k + 1]
        if vals[k] == 0:
            r = a
        elif vals[k + 1] == 0:
            continue
        else:
            r = brentq(gap, a, b, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=200)
        if _arc_is_valid(tau, r, src, dst):
            roots.append(r)
    if not roots:
        raise NoBracketError(f"no {pair} connection for lambda in (-1, 1)")
    return float(roots[0])


# ---------------------------------------------------------------------------
# Serialization
# ---------------------------------------------------------------------------

def trajectory_to_csv(traj: Trajectory) -> str:
    """CSV text with columns ``t, x, y, regime``."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["t", "x", "y", "regime"])
    for i, seg in enumerate(traj.segments):
        rows = seg.points if i == 0 else seg.points[1:]
        for t, x, y in rows:
            w.writerow([repr(float(t)), repr(float(x)), repr(float(y)), seg.regime.value])
    return buf.getvalue()


def trajectory_events_json(traj: Trajectory) -> str:
    """JSON event log of a trajectory."""
    out = {
        "events": [{"t": t, "kind": k, "x": x} for t, k, x in traj.events],
        "segments": [{"regime": s.regime.value, "termination": s.termination.value,
                      "where": s.where, "t_start": float(s.points[0, 0]),
                      "t_end": s.t_end} for s in traj.segments],
    }
    return json.dumps(out, indent=2)
