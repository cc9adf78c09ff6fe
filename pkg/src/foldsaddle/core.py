"""Pointwise Filippov theory on the switching line ``y = 0``.

The switching function is fixed to ``f(x, y) = y``, so the Lie derivative
``X.f`` of a field is its second velocity component and the switching line
``Sigma`` is the x-axis.  The upper field ``X`` acts on ``y >= 0`` and the
lower field ``Y`` on ``y <= 0``.
"""

from __future__ import annotations

import contextlib
import contextvars
import enum
from dataclasses import dataclass, field, fields, replace
from typing import Callable, Optional

import numpy as np
from scipy.optimize import brentq

from .errors import (
    MissingDerivativeError,
    NotARootError,
    OutOfDomainError,
    ParameterError,
    RegionError,
    TangencyError,
    UnsupportedOrderError,
)

__all__ = [
    "Tolerances", "tolerances", "override_tolerances",
    "SmoothField", "x_inv", "x_vis", "y_saddle", "linear_model_field",
    "affine_field", "custom_field", "NsvfSystem",
    "Region", "Visibility", "PseudoKind", "Owner", "SigmaPointClass",
    "FoldPoint", "SigmaInterval", "PseudoEquilibrium",
    "lie_derivative", "classify_sigma_point", "sliding_field",
    "direction_function", "direction_numerator",
    "classify_pseudo_equilibrium", "find_folds", "switch_points",
    "sigma_regions", "find_pseudo_equilibria",
]


# ---------------------------------------------------------------------------
# Tolerances
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Tolerances:
    """Numerical tolerances used throughout the package.

    Attributes
    ----------
    tangency : float
        Relative threshold for ``|X.f| <= tangency * (1 + |X|_inf)``.
    pseudo_equilibrium : float
        ``|H(x)|`` below this marks a pseudo-equilibrium.
    derivative_floor : float
        ``|H'(x)|`` below this marks a degenerate pseudo-equilibrium.
    fold_polish : float
        Absolute accuracy of fold and root polishing on the switching line.
    boundary : float
        Parameter-space tolerance for equalities between thresholds.
    hyperbolic : float
        A multiplier within this distance of 1 is non-hyperbolic.
    slide_stop : float
        The sliding flow stops when ``|H| < slide_stop``.
    rtol, atol : float
        Runge-Kutta tolerances.
    event : float
        Accuracy in ``y`` of refined switching-line hits.
    range_slack : float
        Slack on the admissible parameter ranges.
    """

    tangency: float = 1e-9
    pseudo_equilibrium: float = 1e-9
    derivative_floor: float = 1e-8
    fold_polish: float = 1e-12
    boundary: float = 1e-9
    hyperbolic: float = 1e-6
    slide_stop: float = 1e-10
    rtol: float = 1e-10
    atol: float = 1e-10
    event: float = 1e-12
    range_slack: float = 1e-12

    @classmethod
    def names(cls):
        return [f.name for f in fields(cls)]


_TOL = contextvars.ContextVar("foldsaddle_tolerances", default=Tolerances())


def tolerances() -> Tolerances:
    """Return the tolerances active in the current context."""
    return _TOL.get()


@contextlib.contextmanager
def override_tolerances(**overrides):
    """Temporarily replace some tolerances.

    Examples
    --------
    >>> with override_tolerances(boundary=1e-7):
    ...     tolerances().boundary
    1e-07
    """
    unknown = set(overrides) - set(Tolerances.names())
    if unknown:
        raise ParameterError(f"unknown tolerance(s): {sorted(unknown)}")
    token = _TOL.set(replace(_TOL.get(), **{k: float(v) for k, v in overrides.items()}))
    try:
        yield _TOL.get()
    finally:
        _TOL.reset(token)


# ---------------------------------------------------------------------------
# Smooth fields
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CustomDerivatives:
    """User-supplied closures for a :class:`SmoothField` of kind ``Custom``."""

    vector: Callable
    lie: tuple


@dataclass(frozen=True)
class SmoothField:
    """A smooth planar vector field with closed-form Lie derivatives.

    Parameters
    ----------
    kind : str
        One of ``"XInv"``, ``"XVis"``, ``"YSaddle"``, ``"LinearModel"``,
        ``"Affine"`` or ``"Custom"``.
    params : tuple of float
        ``(lam,)`` for ``XInv``/``XVis``; ``(alpha, beta)`` for ``YSaddle``;
        ``(rho1, k1, a1, side)`` for ``LinearModel`` where ``side`` is +1
        for the upper field and -1 for the lower one; ``(m11, m12, m21, m22,
        c1, c2)`` for ``Affine``.
    custom : CustomDerivatives, optional
        Closures for ``Custom`` fields.

    Notes
    -----
    Use the factory functions :func:`x_inv`, :func:`x_vis`, :func:`y_saddle`,
    :func:`linear_model_field`, :func:`affine_field` and :func:`custom_field`
    rather than the constructor.
    """

    kind: str
    params: tuple = ()
    custom: Optional[CustomDerivatives] = field(default=None, compare=False)

    # Affine kinds share one implementation: v = M p + c.
    def _affine(self):
        k, p = self.kind, self.params
        if k == "YSaddle":
            alpha, beta = p
            a, c = (alpha - 1.0) / 2.0, (1.0 + alpha) / 2.0
            return (c, a, a, c), (a * beta, c * beta)
        if k == "LinearModel":
            rho1, k1, a1, side = p
            if side > 0:
                return (0.0, 0.0, a1, 0.0), (rho1, 0.0)
            return (0.0, k1, k1, 0.0), (0.0, 0.0)
        if k == "Affine":
            return tuple(p[:4]), tuple(p[4:6])
        return None

    def __call__(self, x, y):
        """Evaluate the field; accepts scalars or broadcastable arrays."""
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        if self.kind in ("XInv", "XVis"):
            u = x - self.params[0]
            v2 = -u + u * u if self.kind == "XInv" else u
            return np.ones_like(u + y), v2 + 0.0 * y
        aff = self._affine()
        if aff is not None:
            (m11, m12, m21, m22), (c1, c2) = aff
            return m11 * x + m12 * y + c1, m21 * x + m22 * y + c2
        if self.kind == "Custom":
            v1, v2 = self.custom.vector(x, y)
            return np.asarray(v1, dtype=float), np.asarray(v2, dtype=float)
        raise ParameterError(f"unknown field kind {self.kind!r}")

    def lie(self, x, y, order):
        """Lie derivative of ``f = y`` of the given order along the field."""
        if order not in (1, 2, 3):
            raise UnsupportedOrderError(f"order must be 1, 2 or 3, got {order!r}")
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        if self.kind in ("XInv", "XVis"):
            u = x - self.params[0] + 0.0 * y
            if self.kind == "XInv":
                return (-u + u * u, -1.0 + 2.0 * u, 2.0 + 0.0 * u)[order - 1]
            return (u, 1.0 + 0.0 * u, 0.0 * u)[order - 1]
        aff = self._affine()
        if aff is not None:
            (m11, m12, m21, m22), _ = aff
            v1, v2 = self(x, y)
            if order == 1:
                return v2
            if order == 2:
                return m21 * v1 + m22 * v2
            w1 = m11 * v1 + m12 * v2
            w2 = m21 * v1 + m22 * v2
            return m21 * w1 + m22 * w2
        if self.kind == "Custom":
            lie = self.custom.lie
            if order > len(lie) or lie[order - 1] is None:
                raise MissingDerivativeError(
                    f"custom field has no registered Lie derivative of order {order}")
            return np.asarray(lie[order - 1](x, y), dtype=float)
        raise ParameterError(f"unknown field kind {self.kind!r}")


def x_inv(lam: float) -> SmoothField:
    """Upper field ``(1, -(x-lam) + (x-lam)**2)`` with an invisible fold at ``lam``."""
    return SmoothField("XInv", (float(lam),))


def x_vis(lam: float) -> SmoothField:
    """Upper field ``(1, x-lam)`` with a visible fold at ``lam``."""
    return SmoothField("XVis", (float(lam),))


def y_saddle(alpha: float, beta: float) -> SmoothField:
    """Lower linear field with a saddle at ``(0, -beta)``.

    Eigenvalues are ``alpha`` along ``(1, 1)`` and ``1`` along ``(1, -1)``.

    Raises
    ------
    ParameterError
        If ``alpha >= 0`` (the equilibrium would not be a saddle).
    """
    if not alpha < 0:
        raise ParameterError(f"YSaddle needs alpha < 0, got {alpha}")
    return SmoothField("YSaddle", (float(alpha), float(beta)))


def linear_model_field(rho1: float, k1: float, a1: float, side: str) -> SmoothField:
    """One half of the piecewise-linear model.

    The upper half is ``(rho1, a1*x)`` and the lower half ``(k1*y, k1*x)``.
    """
    if side not in ("upper", "lower"):
        raise ParameterError("side must be 'upper' or 'lower'")
    return SmoothField("LinearModel", (float(rho1), float(k1), float(a1),
                                       1.0 if side == "upper" else -1.0))


def affine_field(matrix, offset) -> SmoothField:
    """Affine field ``v = matrix @ (x, y) + offset``."""
    m = np.asarray(matrix, dtype=float).reshape(2, 2)
    c = np.asarray(offset, dtype=float).reshape(2)
    return SmoothField("Affine", (m[0, 0], m[0, 1], m[1, 0], m[1, 1], c[0], c[1]))


def custom_field(vector, lie1, lie2, lie3=None) -> SmoothField:
    """Field defined by user closures.

    Parameters
    ----------
    vector : callable
        ``vector(x, y) -> (v1, v2)``.
    lie1, lie2, lie3 : callable
        Lie derivatives of ``f = y`` of orders 1 to 3; ``lie3`` is optional.
    """
    return SmoothField("Custom", (), CustomDerivatives(vector, (lie1, lie2, lie3)))


# ---------------------------------------------------------------------------
# Systems and classification types
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class NsvfSystem:
    """Filippov system with switching line ``y = 0``.

    Parameters
    ----------
    upper : SmoothField
        Field ``X`` acting on ``y >= 0``.
    lower : SmoothField
        Field ``Y`` acting on ``y <= 0``.
    domain : tuple of float
        ``(x_min, x_max, y_min, y_max)``; must contain the origin.
    """

    upper: SmoothField
    lower: SmoothField
    domain: tuple = (-1.5, 1.5, -1.5, 1.5)

    def __post_init__(self):
        x0, x1, y0, y1 = (float(v) for v in self.domain)
        if not (x0 <= 0.0 <= x1 and y0 <= 0.0 <= y1 and x0 < x1 and y0 < y1):
            raise ParameterError(f"domain {self.domain} must contain the origin")
        object.__setattr__(self, "domain", (x0, x1, y0, y1))

    @property
    def width(self) -> float:
        return self.domain[1] - self.domain[0]

    def with_domain(self, domain) -> "NsvfSystem":
        return NsvfSystem(self.upper, self.lower, tuple(domain))

    def contains(self, x, y=0.0, slack=0.0) -> bool:
        x0, x1, y0, y1 = self.domain
        return (x0 - slack <= x <= x1 + slack) and (y0 - slack <= y <= y1 + slack)


class Region(str, enum.Enum):
    CROSSING = "Crossing"
    SLIDING = "Sliding"
    ESCAPING = "Escaping"
    TANGENTIAL = "Tangential"
    PSEUDO_EQUILIBRIUM = "PseudoEquilibrium"


class Visibility(str, enum.Enum):
    VISIBLE = "Visible"
    INVISIBLE = "Invisible"
    DEGENERATE = "Degenerate"


class PseudoKind(str, enum.Enum):
    SIGMA_SADDLE = "SigmaSaddle"
    SIGMA_ATTRACTOR = "SigmaAttractor"
    SIGMA_REPELLER = "SigmaRepeller"
    DEGENERATE = "Degenerate"


class Owner(str, enum.Enum):
    X = "X"
    Y = "Y"
    BOTH = "Both"


@dataclass(frozen=True)
class SigmaPointClass:
    """Classification of one point of the switching line.

    ``owner`` and ``visibility`` are set for tangential points,
    ``kind`` for pseudo-equilibria.  ``visibility`` maps ``"X"``/``"Y"`` to a
    :class:`Visibility`.
    """

    region: Region
    owner: Optional[Owner] = None
    visibility: tuple = ()
    kind: Optional[PseudoKind] = None

    def visibility_of(self, who: str) -> Optional[Visibility]:
        return dict(self.visibility).get(who)


@dataclass(frozen=True)
class FoldPoint:
    """A quadratic tangency of one field with the switching line."""

    x: float
    owner: Owner
    visibility: Visibility

    @property
    def location(self):
        return (self.x, 0.0)


@dataclass(frozen=True)
class SigmaInterval:
    """Maximal open interval of the switching line with one region type."""

    lo: float
    hi: float
    region: Region


@dataclass(frozen=True)
class PseudoEquilibrium:
    x: float
    region: Region
    kind: PseudoKind


# ---------------------------------------------------------------------------
# Pointwise operations
# ---------------------------------------------------------------------------

def lie_derivative(fld: SmoothField, p, order: int = 1):
    """Lie derivative of ``f(x, y) = y`` along a field.

    Parameters
    ----------
    fld : SmoothField
    p : tuple of float
        Plane point ``(x, y)``.
    order : {1, 2, 3}

    Returns
    -------
    float

    Examples
    --------
    >>> lie_derivative(x_inv(0.3), (0.3, 0.0), 2)
    -1.0
    """
    return float(fld.lie(p[0], p[1], order))


def _check_on_sigma(Z: NsvfSystem, x: float):
    tol = tolerances()
    if not np.isfinite(x) or not Z.contains(x, 0.0, slack=tol.boundary):
        raise OutOfDomainError(f"({x}, 0) lies outside the domain {Z.domain}")


def _visibility(second: float, owner: str) -> Visibility:
    if abs(second) <= tolerances().tangency:
        return Visibility.DEGENERATE
    if owner == "X":
        return Visibility.VISIBLE if second > 0 else Visibility.INVISIBLE
    # the lower field lives in y <= 0, so the visible arc bends downwards
    return Visibility.VISIBLE if second < 0 else Visibility.INVISIBLE


def _is_tangent(fld: SmoothField, x) -> bool:
    v1, v2 = fld(x, 0.0)
    scale = 1.0 + max(abs(float(v1)), abs(float(v2)))
    return abs(float(v2)) <= tolerances().tangency * scale


def direction_numerator(Z: NsvfSystem, x):
    """Numerator ``E2*D1 - D2*E1`` of the direction function (vectorized)."""
    d1, d2 = Z.upper(x, 0.0)
    e1, e2 = Z.lower(x, 0.0)
    return e2 * d1 - d2 * e1


def direction_function(Z: NsvfSystem, x):
    """Direction function ``H = (E2*D1 - D2*E1) / (E2 - D2)``.

    ``D = X(x, 0)`` and ``E = Y(x, 0)``.  ``H > 0`` means sliding towards
    increasing ``x``; its zeros are the pseudo-equilibria.  At a fold of
    ``X`` with ``Y.f != 0`` the formula gives the limit value ``X1``.

    Parameters
    ----------
    Z : NsvfSystem
    x : float or array_like

    Raises
    ------
    TangencyError
        If ``|E2 - D2|`` is below the tangency tolerance.
    """
    d1, d2 = Z.upper(x, 0.0)
    e1, e2 = Z.lower(x, 0.0)
    den = e2 - d2
    scale = 1.0 + np.maximum(np.abs(d2), np.abs(e2))
    if np.any(np.abs(den) <= tolerances().tangency * scale):
        raise TangencyError(f"Y.f - X.f vanishes at x = {x}")
    h = (e2 * d1 - d2 * e1) / den
    return float(h) if np.ndim(h) == 0 else h


def sliding_field(Z: NsvfSystem, x: float):
    """Filippov sliding vector at ``(x, 0)``.

    Returns the convex combination of ``X`` and ``Y`` tangent to the switching
    line, ``((Y.f*X1 - X.f*Y1) / (Y.f - X.f), 0)``.

    Raises
    ------
    RegionError
        If ``(x, 0)`` is a crossing point.
    TangencyError
        If the denominator vanishes.
    """
    d1, d2 = (float(v) for v in Z.upper(x, 0.0))
    e1, e2 = (float(v) for v in Z.lower(x, 0.0))
    if d2 * e2 > 0:
        raise RegionError(f"x = {x} is a crossing point")
    den = e2 - d2
    if abs(den) <= tolerances().tangency * (1.0 + max(abs(d2), abs(e2))):
        raise TangencyError(f"Y.f - X.f vanishes at x = {x}")
    return ((e2 * d1 - d2 * e1) / den, 0.0)


def _direction_slope(Z: NsvfSystem, x: float) -> float:
    h = 1e-6 * Z.width
    return (direction_function(Z, x + h) - direction_function(Z, x - h)) / (2.0 * h)


def _strict_region(Z: NsvfSystem, x: float) -> Region:
    d2 = float(Z.upper.lie(x, 0.0, 1))
    e2 = float(Z.lower.lie(x, 0.0, 1))
    if d2 * e2 > 0:
        return Region.CROSSING
    if d2 < 0 < e2:
        return Region.SLIDING
    if e2 < 0 < d2:
        return Region.ESCAPING
    return Region.TANGENTIAL


def classify_pseudo_equilibrium(Z: NsvfSystem, x: float) -> PseudoKind:
    """Kind of the pseudo-equilibrium ``(x, 0)``.

    The slope of ``H`` is taken by central differences with step
    ``1e-6 * domain width``.

    Raises
    ------
    NotARootError
        If ``|H(x)|`` exceeds the pseudo-equilibrium tolerance.
    RegionError
        If ``x`` is not in the sliding or escaping region.
    """
    region = _strict_region(Z, x)
    if region not in (Region.SLIDING, Region.ESCAPING):
        raise RegionError(f"x = {x} is not in a sliding or escaping region")
    if abs(direction_function(Z, x)) > tolerances().pseudo_equilibrium:
        raise NotARootError(f"H({x}) = {direction_function(Z, x)} is not zero")
    s = _direction_slope(Z, x)
    if abs(s) <= tolerances().derivative_floor:
        return PseudoKind.DEGENERATE
    if region is Region.SLIDING:
        return PseudoKind.SIGMA_ATTRACTOR if s < 0 else PseudoKind.SIGMA_SADDLE
    return PseudoKind.SIGMA_REPELLER if s > 0 else PseudoKind.SIGMA_SADDLE


def classify_sigma_point(Z: NsvfSystem, x: float) -> SigmaPointClass:
    """Region of the switching-line point ``(x, 0)``.

    Tangency is checked first; a point of the sliding or escaping region
    where ``H`` vanishes is reported as a pseudo-equilibrium.

    Examples
    --------
    >>> Z = NsvfSystem(x_inv(0.0), y_saddle(-1.0, 0.0))
    >>> classify_sigma_point(Z, 0.5).region
    <Region.CROSSING: 'Crossing'>
    """
    _check_on_sigma(Z, x)
    tx, ty = _is_tangent(Z.upper, x), _is_tangent(Z.lower, x)
    if tx or ty:
        vis = []
        if tx:
            vis.append(("X", _visibility(float(Z.upper.lie(x, 0.0, 2)), "X")))
        if ty:
            vis.append(("Y", _visibility(float(Z.lower.lie(x, 0.0, 2)), "Y")))
        owner = Owner.BOTH if tx and ty else (Owner.X if tx else Owner.Y)
        return SigmaPointClass(Region.TANGENTIAL, owner=owner, visibility=tuple(vis))
    region = _strict_region(Z, x)
    if region in (Region.SLIDING, Region.ESCAPING):
        if abs(direction_function(Z, x)) <= tolerances().pseudo_equilibrium:
            return SigmaPointClass(Region.PSEUDO_EQUILIBRIUM,
                                   kind=classify_pseudo_equilibrium(Z, x))
    return SigmaPointClass(region)


# ---------------------------------------------------------------------------
# Global structure along the switching line
# ---------------------------------------------------------------------------

def _roots_on_grid(g, grid):
    """Roots of a vectorized scalar function bracketed on a grid."""
    vals = g(grid)
    tol = tolerances().fold_polish
    roots = list(grid[vals == 0.0])
    idx = np.nonzero(vals[:-1] * vals[1:] < 0)[0]
    for k in idx:
        roots.append(brentq(lambda s: float(g(s)), grid[k], grid[k + 1],
                            xtol=tol, rtol=4 * np.finfo(float).eps))
    return sorted(roots)


def switch_points(fld: SmoothField, lo: float, hi: float, n: int = 2001):
    """Zeros of ``fld.f`` on ``[lo, hi] x {0}``, equilibria included."""
    grid = np.linspace(lo, hi, n)
    return _roots_on_grid(lambda s: fld.lie(s, 0.0, 1), grid)


def find_folds(Z: NsvfSystem, n: int = 2001):
    """All folds of both fields on the switching line inside the domain.

    Roots of ``X.f`` and ``Y.f`` are bracketed on a uniform grid and
    polished to ``fold_polish``.  Equilibria on the line and degenerate
    contacts (vanishing second Lie derivative) are not folds and are
    skipped.

    Returns
    -------
    list of FoldPoint
        Sorted by abscissa.
    """
    lo, hi = Z.domain[0], Z.domain[1]
    out = []
    for name, fld in (("X", Z.upper), ("Y", Z.lower)):
        for x in switch_points(fld, lo, hi, n):
            v1, _ = fld(x, 0.0)
            if abs(float(v1)) <= tolerances().tangency:
                continue  # equilibrium, not a fold
            vis = _visibility(float(fld.lie(x, 0.0, 2)), name)
            if vis is Visibility.DEGENERATE:
                continue
            out.append(FoldPoint(float(x), Owner(name), vis))
    return sorted(out, key=lambda f: f.x)


def sigma_regions(Z: NsvfSystem, lo: Optional[float] = None,
                  hi: Optional[float] = None, n: int = 2001):
    """Partition ``[lo, hi]`` of the switching line into region intervals.

    Returns
    -------
    list of SigmaInterval
        Open intervals between consecutive zeros of ``X.f`` and ``Y.f``;
        neighbouring intervals of equal type are merged.
    """
    lo = Z.domain[0] if lo is None else lo
    hi = Z.domain[1] if hi is None else hi
    cuts = sorted(set([lo, hi] + switch_points(Z.upper, lo, hi, n)
                      + switch_points(Z.lower, lo, hi, n)))
    out = []
    for a, b in zip(cuts[:-1], cuts[1:]):
        if b - a <= tolerances().fold_polish:
            continue
        region = _strict_region(Z, 0.5 * (a + b))
        if out and out[-1].region is region and abs(out[-1].hi - a) <= 10 * tolerances().fold_polish:
            out[-1] = SigmaInterval(out[-1].lo, b, region)
        else:
            out.append(SigmaInterval(a, b, region))
    return out


def find_pseudo_equilibria(Z: NsvfSystem, lo: Optional[float] = None,
                           hi: Optional[float] = None, n: int = 4001):
    """Pseudo-equilibria inside the sliding and escaping intervals.

    Roots of the numerator of ``H`` are bracketed on a cosine-spaced grid of
    each sliding or escaping interval, which keeps the search away from the
    poles of ``H`` while resolving roots near the interval ends.

    Returns
    -------
    list of PseudoEquilibrium
        Sorted by abscissa.
    """
    out = []
    for iv in sigma_regions(Z, lo, hi):
        if iv.region not in (Region.SLIDING, Region.ESCAPING):
            continue
        # cosine spacing resolves roots close to the ends of the interval
        k = np.arange(n)
        grid = iv.lo + (iv.hi - iv.lo) * 0.5 * (1.0 - np.cos(np.pi * k / (n - 1)))
        grid = grid[1:-1]
        if grid.size < 2:
            continue
        for x in _roots_on_grid(lambda s: direction_numerator(Z, s), grid):
            try:
                kind = classify_pseudo_equilibrium(Z, x)
            except (NotARootError, RegionError, TangencyError):
                continue
            out.append(PseudoEquilibrium(float(x), iv.region, kind))
    return sorted(out, key=lambda p: p.x)
