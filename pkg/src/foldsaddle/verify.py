"""Self-checks of closed forms against independent computations.

Every check records what was expected, what was computed and the tolerance
used.  :func:`run_checks` is what ``foldsaddle verify`` executes.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass

import numpy as np

from .core import find_pseudo_equilibria
from .flow import find_connection_lambda, integrate_free
from .normal_forms import (
    FamilyParams,
    alpha0,
    make_system,
    mu0,
    thresholds_L,
    thresholds_M,
    visible_roots,
    y_fold_x,
)
from .return_map import find_canard_cycles, gamma_x, gamma_y, return_domain

__all__ = ["Check", "run_checks", "report_json"]

BETAS = (0.1, 0.3, 0.5, 0.7)


@dataclass(frozen=True)
class Check:
    """Outcome of one comparison."""

    name: str
    expected: float
    actual: float
    tolerance: float
    passed: bool

    @classmethod
    def close(cls, name, expected, actual, tol):
        expected, actual = float(expected), float(actual)
        ok = math.isfinite(actual) and abs(actual - expected) <= tol
        return cls(name, expected, actual, tol, bool(ok))


def _threshold_checks():
    out = []
    for b in BETAS:
        for a in (alpha0(b), -1.0, -0.5):
            m = thresholds_M(a, b)
            for k, pair in enumerate(("h->i", "h->j", "i->j")):
                lam = find_connection_lambda(a, b, pair)
                out.append(Check.close(f"M{k} shooting, alpha={a:.6g}, beta={b}", m[k], lam, 1e-9))
        el = thresholds_L(b)
        em = thresholds_M(alpha0(b), b)
        for k in range(3):
            out.append(Check.close(f"L{k} = M{k} on the resonance curve, beta={b}",
                                   el[k], em[k], 1e-9))
    lam = find_connection_lambda(alpha0(0.5), 0.5, "h->j")
    out.append(Check.close("L1 shooting at beta=0.5", -0.5 + math.sqrt(6.0) / 6.0, lam, 1e-9))
    return out


def _identity_checks():
    betas = np.linspace(-0.85, 0.85, 50)
    err = float(np.max(np.abs(mu0(betas) - (alpha0(betas) + 1.0))))
    out = [Check.close("mu0 = alpha0 + 1 over 50 betas", 0.0, err, 1e-12)]
    bp = np.linspace(0.02, 0.85, 50)
    err = max(abs(y_fold_x(alpha0(b), b) - thresholds_L(b)[1]) for b in bp)
    out.append(Check.close("i1(alpha0) = L1 over 50 betas", 0.0, err, 1e-12))
    return out


def _fixed_point_check():
    p = FamilyParams.from_alpha("inv", -0.5 + 11.0 * math.sqrt(6.0) / 60.0, 0.5, -1.0)
    cycles = find_canard_cycles(p)
    target = -math.sqrt(29.0 / 2.0) / 10.0
    out = [Check.close("number of canard cycles, case 13_2", 1, len(cycles), 0)]
    x = cycles[0].fixed_x if cycles else math.nan
    out.append(Check.close("fixed point x* = -sqrt(29/2)/10", target, x, 1e-6))
    m = cycles[0].multiplier if cycles else math.nan
    out.append(Check("multiplier > 1 (repelling cycle)", 1.0, m, 0.0, bool(m > 1.0)))
    return out


def _pseudo_checks():
    rng = np.random.default_rng(7)
    worst = 0.0
    for _ in range(20):
        lam, b = rng.uniform(-0.9, 0.9), rng.uniform(0.05, 0.8)
        Z = make_system(FamilyParams("vis", lam, b, 0.0), domain=(-10.0, 10.0, -2.0, 2.0))
        xs = [q.x for q in find_pseudo_equilibria(Z)]
        target = b * lam / (b - 1.0)
        worst = max(worst, min((abs(x - target) for x in xs), default=math.inf))
    out = [Check.close("pseudo-equilibrium at alpha=-1 is beta*lam/(beta-1)", 0.0, worst, 1e-9)]
    worst = 0.0
    for _ in range(20):
        lam, b, mu = rng.uniform(-0.9, 0.9), rng.uniform(0.05, 0.8), rng.uniform(0.01, 0.05)
        Z = make_system(FamilyParams("vis", lam, b, mu), domain=(-10.0, 10.0, -2.0, 2.0))
        xs = [q.x for q in find_pseudo_equilibria(Z)]
        target = visible_roots(mu - 1.0, b, lam)[1]
        worst = max(worst, min((abs(x - target) for x in xs), default=math.inf))
    out.append(Check.close("pseudo-equilibrium P of the visible family, mu > 0", 0.0, worst, 1e-9))
    return out


def _half_map_checks():
    p = FamilyParams.from_alpha("inv", -0.1, 0.5, -1.2)
    dom = return_domain(p)
    xs = np.linspace(dom[0], dom[1], 12)[1:-1]
    Z = make_system(p, domain=(-3.0, 3.0, -3.0, 3.0))
    ex, ey, ix, iy = 0.0, 0.0, 0.0, 0.0
    for x in xs:
        gx = gamma_x(p, x)
        seg = integrate_free(Z.upper, (x, 0.0), "upper", 50.0, domain=Z.domain, method="DOP853")
        ex = max(ex, abs(seg.end[0] - gx))
        gy = gamma_y(p, gx)
        seg = integrate_free(Z.lower, (gx, 0.0), "lower", 50.0, domain=Z.domain, method="DOP853")
        ey = max(ey, abs(seg.end[0] - gy))
        ix = max(ix, abs(gamma_x(p, gx) - x))
        iy = max(iy, abs(gamma_y(p, gy) - gx))
    return [Check.close("gamma_X vs integration", 0.0, ex, 1e-8),
            Check.close("gamma_Y vs integration", 0.0, ey, 1e-8),
            Check.close("gamma_X is an involution", 0.0, ix, 1e-9),
            Check.close("gamma_Y is an involution", 0.0, iy, 1e-9)]


def run_checks():
    """Run every check.

    Returns
    -------
    list of Check
    """
    return (_identity_checks() + _threshold_checks() + _fixed_point_check()
            + _pseudo_checks() + _half_map_checks())


def report_json(checks) -> str:
    """JSON report with a summary and one record per check."""
    return json.dumps({
        "passed": all(c.passed for c in checks),
        "n_checks": len(checks),
        "n_failed": sum(not c.passed for c in checks),
        "checks": [asdict(c) for c in checks],
    }, indent=2)
