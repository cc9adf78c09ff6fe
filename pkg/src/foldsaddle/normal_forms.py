"""Fold-saddle normal forms, their geometry and closed-form thresholds.

The family has an upper field with a fold at ``x = lam``,

* ``inv``: ``X = (1, -(x-lam) + (x-lam)**2)`` (invisible fold),
* ``vis``: ``X = (1, x-lam)`` (visible fold),

and a lower linear saddle ``Y`` at ``S = (0, -beta)`` with eigenvalues
``alpha`` and ``1``.  The second family parameter is ``mu = alpha + 1``.
In the eigen-coordinates ``p = x + (y+beta)``, ``q = x - (y+beta)`` the
lower flow is ``p' = alpha p``, ``q' = q``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .core import (
    NsvfSystem,
    Visibility,
    affine_field,
    linear_model_field,
    tolerances,
    x_inv,
    x_vis,
    y_saddle,
)
from .errors import NoRootError, ParameterError

__all__ = [
    "BETA_MAX", "FamilyParams", "GeometryReport", "make_system", "geometry",
    "y_fold_x", "mu0", "alpha0", "thresholds_L", "thresholds_M",
    "orbit_height_primitive", "x_orbit_height", "visible_roots",
    "q_root_visible", "p_root_visible", "linear_model", "spring_mass_preset",
]

BETA_MAX = math.sqrt(3.0) / 2.0


@dataclass(frozen=True)
class FamilyParams:
    """Parameters ``(tau, lambda, beta, mu)`` of the fold-saddle family.

    Parameters
    ----------
    tau : {"inv", "vis"}
        Type of the upper fold.
    lam : float
        Fold abscissa, in ``(-1, 1)``.
    beta : float
        Minus the ordinate of the saddle, in ``(-sqrt(3)/2, sqrt(3)/2)``.
    mu : float
        ``alpha + 1``; the saddle condition requires ``mu < 1``.

    Notes
    -----
    Range checks allow a slack of ``range_slack`` so that grid scans may land
    exactly on the boundary of the box.
    """

    tau: str
    lam: float
    beta: float
    mu: float

    def __post_init__(self):
        slack = tolerances().range_slack
        if self.tau not in ("inv", "vis"):
            raise ParameterError(f"tau must be 'inv' or 'vis', got {self.tau!r}")
        for name in ("lam", "beta", "mu"):
            v = getattr(self, name)
            if not isinstance(v, (int, float, np.floating, np.integer)) or not math.isfinite(v):
                raise ParameterError(f"{name} must be a finite number, got {v!r}")
            object.__setattr__(self, name, float(v))
        if not abs(self.lam) < 1.0 + slack:
            raise ParameterError(f"lambda = {self.lam} outside (-1, 1)")
        if not abs(self.beta) < BETA_MAX + slack:
            raise ParameterError(f"beta = {self.beta} outside (-sqrt(3)/2, sqrt(3)/2)")
        if not self.mu < 1.0:
            raise ParameterError(f"mu = {self.mu} must be < 1 (alpha < 0)")

    @classmethod
    def from_alpha(cls, tau, lam, beta, alpha):
        return cls(tau, lam, beta, alpha + 1.0)

    @property
    def alpha(self) -> float:
        return self.mu - 1.0

    def with_lambda(self, lam) -> "FamilyParams":
        return FamilyParams(self.tau, lam, self.beta, self.mu)

    def to_dict(self) -> dict:
        return {"tau": self.tau, "lambda": self.lam, "beta": self.beta, "mu": self.mu}

    @classmethod
    def from_dict(cls, d: dict) -> "FamilyParams":
        try:
            return cls(d["tau"], d["lambda"], d["beta"], d["mu"])
        except KeyError as exc:
            raise ParameterError(f"missing key {exc.args[0]!r}") from None

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text: str) -> "FamilyParams":
        return cls.from_dict(json.loads(text))


def make_system(p: FamilyParams, domain=(-1.5, 1.5, -1.5, 1.5)) -> NsvfSystem:
    """Filippov system of the family at the given parameters."""
    upper = x_inv(p.lam) if p.tau == "inv" else x_vis(p.lam)
    return NsvfSystem(upper, y_saddle(p.alpha, p.beta), tuple(domain))


def y_fold_x(alpha, beta):
    """Abscissa ``beta (1+alpha)/(1-alpha)`` of the fold of ``Y``."""
    return beta * (1.0 + alpha) / (1.0 - alpha)


@dataclass(frozen=True)
class GeometryReport:
    """Distinguished points of the family on and below the switching line.

    ``e_or_i`` is ``None`` when ``beta = 0`` (the fold of ``Y`` merges with
    the saddle).  ``behavior`` is ``"Yminus"``, ``"Yzero"`` or ``"Yplus"``.
    """

    d: tuple
    S: tuple
    e_or_i: Optional[tuple]
    y_fold_visibility: Optional[Visibility]
    h: tuple
    j: tuple
    behavior: str

    @property
    def d1(self):
        return self.d[0]

    @property
    def fold1(self):
        return None if self.e_or_i is None else self.e_or_i[0]


def _behavior(beta: float) -> str:
    if beta > 0:
        return "Yplus"
    if beta < 0:
        return "Yminus"
    return "Yzero"


def geometry(p: FamilyParams) -> GeometryReport:
    """Folds, saddle and separatrix feet of the family.

    ``h = (-beta, 0)`` lies on the unstable separatrix of ``S`` and
    ``j = (beta, 0)`` on the stable one.  ``Y^2.f`` at the fold of ``Y``
    equals ``-alpha*beta``, so the fold is invisible for ``beta > 0``.
    """
    beh = _behavior(p.beta)
    fold, vis = None, None
    if beh != "Yzero":
        fold = (y_fold_x(p.alpha, p.beta), 0.0)
        vis = Visibility.VISIBLE if -p.alpha * p.beta < 0 else Visibility.INVISIBLE
    return GeometryReport(d=(p.lam, 0.0), S=(0.0, -p.beta), e_or_i=fold,
                          y_fold_visibility=vis, h=(-p.beta, 0.0),
                          j=(p.beta, 0.0), behavior=beh)


def _check_beta(beta, positive=False):
    b = np.asarray(beta, dtype=float)
    slack = tolerances().range_slack
    if np.any(~np.isfinite(b)) or np.any(np.abs(b) > BETA_MAX + slack):
        raise ParameterError(f"beta = {beta} outside (-sqrt(3)/2, sqrt(3)/2)")
    if positive and np.any(b <= 0):
        raise ParameterError(f"beta = {beta} must be positive")
    return b


def _root_term(b):
    return np.sqrt(np.maximum(9.0 - 12.0 * b * b, 0.0))


def alpha0(beta):
    """Eigenvalue ``alpha`` on the resonance curve.

    The closed form ``1 - 12 beta / (-3 + 6 beta + s)``, ``s = sqrt(9 - 12
    beta**2)``, has a removable singularity at ``beta = 0``.  It is evaluated
    in the equivalent form ``-(s + 3 + 2 beta) / (s + 3 - 2 beta)``, which is
    regular there and gives ``alpha0(0) = -1``.

    Examples
    --------
    >>> round(alpha0(0.5), 12)
    -1.449489742783
    """
    b = _check_beta(beta)
    s = _root_term(b)
    out = -(s + 3.0 + 2.0 * b) / (s + 3.0 - 2.0 * b)
    return float(out) if out.ndim == 0 else out


def mu0(beta):
    """``mu`` on the resonance curve, ``alpha0(beta) + 1``.

    Examples
    --------
    >>> round(mu0(0.5), 12)
    -0.449489742783
    """
    b = _check_beta(beta)
    s = _root_term(b)
    out = -4.0 * b / (s + 3.0 - 2.0 * b)
    return float(out) if out.ndim == 0 else out


def _l1(b):
    return -0.5 + _root_term(b) / 6.0


def thresholds_L(beta):
    """Connection thresholds ``(L0, L1, L2)`` on the resonance curve.

    ``L0``, ``L1`` and ``L2`` are the values of ``lambda`` at which an arc of
    ``X`` joins ``h`` to ``i``, ``h`` to ``j`` and ``i`` to ``j``.

    Raises
    ------
    ParameterError
        If ``beta <= 0``.
    """
    b = _check_beta(beta, positive=True)
    s = _root_term(b)
    r2 = math.sqrt(2.0)
    l0 = (-9.0 - 6.0 * b + s
          + r2 * np.sqrt(15.0 + s - 2.0 * b * (-3.0 + 2.0 * b + s))) / 12.0
    l2 = (-9.0 + 6.0 * b + s
          + r2 * np.sqrt(15.0 + s + 2.0 * b * (-3.0 - 2.0 * b + s))) / 12.0
    vals = (l0, _l1(b), l2)
    return tuple(float(v) for v in vals) if b.ndim == 0 else vals


def thresholds_M(alpha, beta):
    """Connection thresholds ``(M0, M1, M2)`` for general ``alpha < 0``.

    Raises
    ------
    ParameterError
        If ``beta <= 0`` or ``alpha >= 0``.
    """
    b = _check_beta(beta, positive=True)
    a = np.asarray(alpha, dtype=float)
    if np.any(a >= 0):
        raise ParameterError(f"alpha = {alpha} must be negative")
    am1 = a - 1.0
    den = 6.0 * am1 ** 2
    m0 = (-3.0 - 3.0 * a * (-2.0 + a + 2.0 * am1 * b)
          + np.sqrt(9.0 * am1 ** 4 - 12.0 * am1 ** 2 * b ** 2)) / den
    m2 = (-3.0 + 6.0 * b - 3.0 * a * (-2.0 + a + 2.0 * b)
          + np.sqrt(9.0 * am1 ** 4 - 12.0 * am1 ** 2 * a ** 2 * b ** 2)) / den
    m1 = _l1(b) + 0.0 * a
    vals = (m0, m1, m2)
    if np.ndim(m0) == 0:
        return tuple(float(v) for v in vals)
    return vals


def orbit_height_primitive(tau: str, u):
    """Height ``F(u)`` of the upper orbit, ``y = F(x-lam) + const``.

    ``F(u) = -u**2/2 + u**3/3`` for ``inv`` and ``u**2/2`` for ``vis``.
    """
    u = np.asarray(u, dtype=float)
    if tau == "inv":
        out = -0.5 * u * u + u ** 3 / 3.0
    elif tau == "vis":
        out = 0.5 * u * u
    else:
        raise ParameterError(f"unknown tau {tau!r}")
    return float(out) if out.ndim == 0 else out


def x_orbit_height(tau: str, lam, x_from, x_to):
    """Signed height reached at ``x_to`` by the upper orbit leaving ``(x_from, 0)``.

    Since ``x' = 1`` the orbit is a graph over ``x`` and the height is
    ``F(x_to - lam) - F(x_from - lam)``.

    Examples
    --------
    >>> x_orbit_height("vis", 0.0, -0.3, 0.3)
    0.0
    """
    return (orbit_height_primitive(tau, np.asarray(x_to) - lam)
            - orbit_height_primitive(tau, np.asarray(x_from) - lam))


def _visible_quadratic(alpha, beta, lam):
    # Numerator of H for the visible family, (1+a) x^2 - B x - C.
    a2 = 1.0 + alpha
    b = (alpha - 1.0) * (1.0 - beta) + lam * (1.0 + alpha)
    c = beta * ((1.0 + alpha) + lam * (alpha - 1.0))
    return a2, b, c


def visible_roots(alpha, beta, lam):
    """Both roots ``(q, p)`` of ``H`` for the visible family.

    ``H`` has numerator ``(1+alpha) x**2 - B x - C`` with
    ``B = (alpha-1)(1-beta) + lam (1+alpha)`` and
    ``C = beta ((1+alpha) + lam (alpha-1))``.  ``q`` is the root that leaves
    every bounded set as ``alpha -> -1`` and ``p`` the one that tends to
    ``beta*lam/(beta-1)``.  Both are evaluated without cancellation.

    Raises
    ------
    NoRootError
        If the discriminant is negative.
    """
    a2, b, c = _visible_quadratic(alpha, beta, lam)
    disc = b * b + 4.0 * a2 * c
    if disc < 0:
        raise NoRootError(f"H has no real root (discriminant {disc:.3e})")
    half = 0.5 * (b + math.copysign(math.sqrt(disc), b))
    p = -c / half if half != 0 else math.nan
    q = half / a2 if a2 != 0 else math.nan
    return q, p


def q_root_visible(alpha, beta, lam):
    """Abscissa of the Sigma-saddle ``Q`` of the visible family.

    Raises
    ------
    ParameterError
        If ``alpha == -1`` (``Q`` is at infinity) or ``alpha >= 0``.
    NoRootError
        If the discriminant is negative.
    """
    if not alpha < 0:
        raise ParameterError(f"alpha = {alpha} must be negative")
    if alpha == -1.0:
        raise ParameterError("Q does not exist at alpha = -1")
    return visible_roots(alpha, beta, lam)[0]


def p_root_visible(alpha, beta, lam):
    """Abscissa of the pseudo-equilibrium ``P`` of the visible family.

    Equals ``beta*lam/(beta-1)`` at ``alpha = -1``.
    """
    if not alpha < 0:
        raise ParameterError(f"alpha = {alpha} must be negative")
    return visible_roots(alpha, beta, lam)[1]


def linear_model(rho1: float = 1.0, k1: float = -1.0, tau: str = "inv",
                 domain=(-1.5, 1.5, -1.5, 1.5)) -> NsvfSystem:
    """Piecewise-linear fold-saddle model ``X = (rho1, a1 x)``, ``Y = (k1 y, k1 x)``.

    ``a1 = -1`` for ``inv`` and ``+1`` for ``vis``.
    """
    if tau not in ("inv", "vis"):
        raise ParameterError(f"unknown tau {tau!r}")
    if abs(rho1) != 1.0 or abs(k1) != 1.0:
        raise ParameterError("rho1 and k1 must be +1 or -1")
    a1 = -1.0 if tau == "inv" else 1.0
    return NsvfSystem(linear_model_field(rho1, k1, a1, "upper"),
                      linear_model_field(rho1, k1, a1, "lower"), tuple(domain))


def spring_mass_preset(a: float, b: float, c: float, A: float,
                       domain=(-1.5, 1.5, -1.5, 1.5)) -> NsvfSystem:
    """Forced spring-mass oscillator ``a x'' + b x' + c x = A x + 1 - sgn(x)``.

    In phase coordinates ``(x, v = x')`` the switching line is ``x = 0``.
    The system is returned in the rotated coordinates ``(u, w) = (v, -x)``
    so that switching happens on ``w = 0``: the upper half ``w > 0`` carries
    the forced side ``x < 0`` (invisible fold at the origin) and the lower
    half the saddle side ``x > 0``.

    Raises
    ------
    ParameterError
        If ``a <= 0`` or ``A <= c/a`` (the origin is then not a saddle).
    """
    if not a > 0:
        raise ParameterError("a must be positive")
    k = A - c / a
    if not k > 0:
        raise ParameterError("A must exceed c/a for a saddle")
    m = [[-b / a, -k], [-1.0, 0.0]]
    return NsvfSystem(affine_field(m, (2.0, 0.0)), affine_field(m, (0.0, 0.0)),
                      tuple(domain))
