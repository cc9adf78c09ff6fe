"""Case taxonomy of the fold-saddle family and parameter scans.

Classification is two-layered.  A decision table turns the position of
``lambda`` relative to the closed-form thresholds into a case index and a
predicted structure (pseudo-equilibria, canard cycles, connections,
coincidences).  The structure is then computed independently with
:mod:`foldsaddle.core` and :mod:`foldsaddle.return_map`; any disagreement
raises :class:`~foldsaddle.errors.StructuralMismatch`.
"""

from __future__ import annotations

import csv
import io
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np

from .core import direction_function, find_pseudo_equilibria, sigma_regions, tolerances
from .flow import slide
from .errors import (
    FoldSaddleError,
    NoBracketError,
    ParameterError,
    StructuralMismatch,
)
from .normal_forms import (
    BETA_MAX,
    _visible_quadratic,
    FamilyParams,
    make_system,
    mu0,
    orbit_height_primitive,
    thresholds_L,
    thresholds_M,
    y_fold_x,
)
from .return_map import find_canard_cycles, find_saddle_node

__all__ = [
    "Descriptors", "CaseLabel", "CellResult", "ScanResult", "SaddleNodeCache",
    "which_theorem", "slice_mu", "predict_case", "compute_structure",
    "classify_case", "detect_sigma_graph", "SigmaGraph", "scan",
    "pseudo_equilibrium_attracts_forward", "CodimensionTwoPoint", "theorem_slice",
]

SA, SR, SS = "SigmaAttractor", "SigmaRepeller", "SigmaSaddle"
ATT, REP, NH = "Attractor", "Repeller", "NonHyperbolic"
VIS_WINDOW = 50.0


class CodimensionTwoPoint(StructuralMismatch):
    """Parameters lie on two boundary curves at once."""


# ---------------------------------------------------------------------------
# Descriptors and labels
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Descriptors:
    """Structural facts of one phase portrait.

    ``pseudo_equilibria`` lists kinds by increasing abscissa and ``cycles``
    lists stabilities from the outermost cycle inwards.
    """

    behavior: str
    pseudo_equilibria: tuple = ()
    cycles: tuple = ()
    connections: tuple = ()
    tangency_coincidences: tuple = ()
    sigma_graph: bool = False

    def to_dict(self) -> dict:
        d = asdict(self)
        d["cycles"] = {"count": len(self.cycles), "stabilities": list(self.cycles)}
        d["pseudo_equilibria"] = list(self.pseudo_equilibria)
        d["connections"] = list(self.connections)
        d["tangency_coincidences"] = list(self.tangency_coincidences)
        return d


@dataclass(frozen=True)
class CaseLabel:
    """Case of one parameter point, e.g. theorem ``"T1"``, index ``"12_1"``."""

    theorem: str
    case_index: str
    descriptors: Descriptors
    details: dict = field(default_factory=dict, compare=False)

    @property
    def name(self) -> str:
        return f"{self.theorem}/{self.case_index}"

    def to_dict(self) -> dict:
        return {"theorem": self.theorem, "case_index": self.case_index,
                "descriptors": self.descriptors.to_dict(), "details": self.details}


# ---------------------------------------------------------------------------
# Theorem selection
# ---------------------------------------------------------------------------

def which_theorem(tau: str, mu: float, beta: float) -> str:
    """Theorem whose hypothesis on ``mu`` holds.

    For ``inv``: ``T1`` on the resonance curve ``mu = mu0(beta)``, ``T2``
    above it and ``T3`` below it.  For ``vis``: ``T4`` at ``mu = 0``, ``T5``
    for ``mu > 0`` and ``T6`` for ``mu < 0``.  Equalities are decided within
    the boundary tolerance.
    """
    tol = tolerances().boundary
    if not abs(beta) < BETA_MAX + tolerances().range_slack:
        raise ParameterError(f"beta = {beta} out of range")
    if not mu < 1.0:
        raise ParameterError(f"mu = {mu} must be < 1")
    if tau == "inv":
        m0 = mu0(beta)
        if abs(mu - m0) <= tol:
            return "T1"
        return "T2" if mu > m0 else "T3"
    if tau == "vis":
        if abs(mu) <= tol:
            return "T4"
        return "T5" if mu > 0 else "T6"
    raise ParameterError(f"unknown tau {tau!r}")


_SLICE_RULES = {
    "T1": ("inv", "mu0_curve", 0.0),
    "T2": ("inv", "mu0_offset", 0.2),
    "T3": ("inv", "mu0_offset", -0.2),
    "T4": ("vis", "fixed", 0.0),
    "T5": ("vis", "fixed", 0.05),
    "T6": ("vis", "fixed", -0.05),
}


def slice_mu(mu_rule, beta: float) -> float:
    """``mu`` prescribed by a slice rule at ``beta``.

    ``mu_rule`` is ``"mu0_curve"``, ``("mu0_offset", delta)`` (clipped below
    one) or ``("fixed", mu)``.
    """
    if mu_rule == "mu0_curve":
        return mu0(beta)
    kind, value = mu_rule
    if kind == "mu0_offset":
        return min(mu0(beta) + value, 1.0 - 1e-6)
    if kind == "fixed":
        return float(value)
    raise ParameterError(f"unknown mu rule {mu_rule!r}")


# ---------------------------------------------------------------------------
# Decision tables
# ---------------------------------------------------------------------------

class SaddleNodeCache:
    """Memo of saddle-node values per ``(alpha, beta)``."""

    def __init__(self):
        self._store = {}

    def get(self, alpha: float, beta: float):
        key = (round(alpha, 14), round(beta, 14))
        if key not in self._store:
            try:
                self._store[key] = find_saddle_node(alpha, beta)
            except NoBracketError:
                self._store[key] = None
        return self._store[key]


_DEFAULT_CACHE = SaddleNodeCache()


def _behavior(beta):
    tol = tolerances().boundary
    if beta > tol:
        return "Yplus"
    if beta < -tol:
        return "Yminus"
    return "Yzero"


def _inv_thresholds(p: FamilyParams, theorem: str, cache: SaddleNodeCache):
    alpha, beta = p.alpha, p.beta
    i1 = y_fold_x(alpha, beta)
    if theorem == "T1":
        t0, t1, t2 = thresholds_L(beta)
    else:
        t0, t1, t2 = thresholds_M(alpha, beta)
    t3 = cache.get(alpha, beta)
    return {"h": -beta, "0": t0, "1": t1, "2": t2, "3": t3, "i": i1, "j": beta}


# Each row: (case number, kind, lower key, upper key) where kind "eq" tests
# lambda == value[lower] and "in" tests value[lower] < lambda < value[upper];
# None stands for -infinity/+infinity.
_ROWS = {
    "T1": [(7, "in", None, "h"), (8, "eq", "h", None), (9, "in", "h", "0"),
           (10, "eq", "0", None), (11, "in", "0", "1"), (12, "eq", "1", None),
           (13, "in", "1", "3"), (14, "eq", "3", None), (15, "in", "3", "2"),
           (16, "eq", "2", None), (17, "in", "2", "j"), (18, "eq", "j", None),
           (19, "in", "j", None)],
    "T2": [(7, "in", None, "h"), (8, "eq", "h", None), (9, "in", "h", "0"),
           (10, "eq", "0", None), (11, "in", "0", "1"), (12, "eq", "1", None),
           (13, "in", "1", "i"), (14, "eq", "i", None), (15, "in", "i", "3"),
           (16, "eq", "3", None), (17, "in", "3", "2"), (18, "eq", "2", None),
           (19, "in", "2", "j"), (20, "eq", "j", None), (21, "in", "j", None)],
    "T3": [(7, "in", None, "h"), (8, "eq", "h", None), (9, "in", "h", "0"),
           (10, "eq", "0", None), (11, "in", "0", "i"), (12, "eq", "i", None),
           (13, "in", "i", "1"), (14, "eq", "1", None), (15, "in", "1", "3"),
           (16, "eq", "3", None), (17, "in", "3", "2"), (18, "eq", "2", None),
           (19, "in", "2", "j"), (20, "eq", "j", None), (21, "in", "j", None)],
}

# Predicted (pseudo-equilibria, cycles outermost first, connection, coincidence, graph)
_TWO = (ATT, REP)
_INV_PLUS = {
    "T1": {7: ((SA,), ()), 8: ((SA,), ()), 9: ((SA,), ()), 10: ((SA,), ()),
           11: ((SA,), ()), 12: ((), ()), 13: ((SR,), _TWO), 14: ((SR,), (NH,)),
           15: ((SR,), ()), 16: ((SR,), ()), 17: ((SR,), ()), 18: ((SR,), ()),
           19: ((SR,), ())},
    "T2": {7: ((SA,), ()), 8: ((SA,), ()), 9: ((SA,), ()), 10: ((SA,), ()),
           11: ((SA,), ()), 12: ((SA,), ()), 13: ((SA,), (REP,)), 14: ((), (REP,)),
           15: ((SR,), _TWO), 16: ((SR,), (NH,)), 17: ((SR,), ()), 18: ((SR,), ()),
           19: ((SR,), ()), 20: ((SR,), ()), 21: ((SR,), ())},
    "T3": {7: ((SA,), ()), 8: ((SA,), ()), 9: ((SA,), ()), 10: ((SA,), ()),
           11: ((SA,), ()), 12: ((), ()), 13: ((SR,), (ATT,)), 14: ((SR,), (ATT,)),
           15: ((SR,), _TWO), 16: ((SR,), (NH,)), 17: ((SR,), ()), 18: ((SR,), ()),
           19: ((SR,), ()), 20: ((SR,), ()), 21: ((SR,), ())},
}
_CONNECTION_OF = {"0": "h->i", "1": "h->j", "2": "i->j"}
_COINCIDENCE_OF = {"h": "d=h", "i": "d=i", "j": "d=j"}


def _match_rows(lam, rows, values, tol):
    """Case numbers whose condition holds; equalities are tested first."""
    eq = [r for r in rows if r[1] == "eq" and values[r[2]] is not None
          and abs(lam - values[r[2]]) <= tol]
    if eq:
        return eq
    for r in rows:
        if r[1] != "in":
            continue
        lo = -math.inf if r[2] is None else values[r[2]]
        hi = math.inf if r[3] is None else values[r[3]]
        if lo is None or hi is None:
            continue
        if lo + tol < lam < hi - tol:
            return [r]
    return []


def _side_cases(lam, ref, first, coincidence, tol):
    # (first) d < ref, (first+1) d = ref, (first+2) d > ref
    if abs(lam - ref) <= tol:
        return first + 1, (coincidence,)
    return (first, ()) if lam < ref else (first + 2, ())


def predict_case(p: FamilyParams, cache: Optional[SaddleNodeCache] = None):
    """Case index and predicted structure from the decision table.

    Returns
    -------
    theorem : str
    case_index : str
    predicted : Descriptors
    thresholds : dict
        Threshold values used, keyed by name.

    Raises
    ------
    StructuralMismatch
        If no table condition holds (e.g. a saddle-node value that the table
        needs does not exist).
    CodimensionTwoPoint
        If ``lambda`` sits on two boundary curves at once.
    """
    cache = _DEFAULT_CACHE if cache is None else cache
    tol = tolerances().boundary
    th = which_theorem(p.tau, p.mu, p.beta)
    n = int(th[1])
    beh = _behavior(p.beta)
    lam = p.lam
    if beh == "Yminus":
        e1 = y_fold_x(p.alpha, p.beta)
        case, coin = _side_cases(lam, e1, 1, "d=e", tol)
        pe = {4: (), 5: (SS,), 6: (SS,)}.get(n, ())
        d = Descriptors(beh, pe, (), (), coin, False)
        return th, f"{case}_{n}", d, {"e": e1}
    if beh == "Yzero":
        case, coin = _side_cases(lam, 0.0, 4, "d=s", tol)
        pe = {4: (), 5: (SS,), 6: (SS,)}.get(n, ())
        d = Descriptors(beh, pe, (), (), coin, False)
        return th, f"{case}_{n}", d, {"s": 0.0}
    if p.tau == "vis":
        i1 = y_fold_x(p.alpha, p.beta)
        values = {"h": -p.beta, "i": i1, "j": p.beta}
        rows = [(7, "in", None, "h"), (8, "eq", "h", None), (9, "in", "h", "i"),
                (10, "eq", "i", None), (11, "in", "i", "j"), (12, "eq", "j", None),
                (13, "in", "j", None)]
        hits = _match_rows(lam, rows, values, tol)
        if len(hits) != 1:
            _raise_unmatched(th, hits, n, values)
        case = hits[0][0]
        core_pe = (SR,) if case <= 9 else ((SA,) if case >= 11 else ())
        if n == 5:
            core_pe = (SS,) + core_pe
        elif n == 6:
            core_pe = core_pe + (SS,)
        coin = (_COINCIDENCE_OF[hits[0][2]],) if hits[0][1] == "eq" else ()
        d = Descriptors(beh, core_pe, (), (), coin, case == 10)
        return th, f"{case}_{n}", d, values
    values = _inv_thresholds(p, th, cache)
    hits = _match_rows(lam, _ROWS[th], values, tol)
    if len(hits) != 1:
        _raise_unmatched(th, hits, n, values)
    row = hits[0]
    case = row[0]
    pe, cyc = _INV_PLUS[th][case]
    conn, coin = (), ()
    if row[1] == "eq":
        key = row[2]
        if key in _CONNECTION_OF:
            conn = (_CONNECTION_OF[key],)
        if key in _COINCIDENCE_OF:
            coin = (_COINCIDENCE_OF[key],)
    if th == "T1" and case == 12:
        coin = ("d=i",)  # the loop and the fold-fold point coincide on this slice
    graph = "h->j" in conn
    d = Descriptors(beh, pe, cyc, conn, coin, graph)
    return th, f"{case}_{n}", d, values


def _raise_unmatched(th, hits, n, values):
    if len(hits) > 1:
        label = "+".join(f"{h[0]}_{n}" for h in hits)
        raise CodimensionTwoPoint(f"{th}: parameters on two boundaries ({label})",
                                  label=label)
    missing = [k for k, v in values.items() if v is None]
    why = f"; missing threshold(s) {missing}" if missing else ""
    raise StructuralMismatch(f"{th}: no case condition holds{why}",
                             predicted={"thresholds": values})


# ---------------------------------------------------------------------------
# Computed structure
# ---------------------------------------------------------------------------

def _connections(p: FamilyParams):
    if p.tau != "inv" or not p.beta > tolerances().boundary:
        return ()
    i1 = y_fold_x(p.alpha, p.beta)
    found = []
    for name, (src, dst) in {"h->i": (-p.beta, i1), "h->j": (-p.beta, p.beta),
                             "i->j": (i1, p.beta)}.items():
        if not (src < p.lam < dst):
            continue
        gap = (orbit_height_primitive("inv", dst - p.lam)
               - orbit_height_primitive("inv", src - p.lam))
        if abs(gap) > tolerances().boundary:
            continue
        xs = np.linspace(src, dst, 2001)[1:-1]
        h = orbit_height_primitive("inv", xs - p.lam) - orbit_height_primitive("inv", src - p.lam)
        if np.all(h > -tolerances().boundary):
            found.append(name)
    return tuple(found)


def _coincidences(p: FamilyParams):
    tol = tolerances().boundary
    beh = _behavior(p.beta)
    if beh == "Yzero":
        return ("d=s",) if abs(p.lam) <= tol else ()
    e1 = y_fold_x(p.alpha, p.beta)
    if beh == "Yminus":
        return ("d=e",) if abs(p.lam - e1) <= tol else ()
    out = []
    for name, v in (("d=h", -p.beta), ("d=i", e1), ("d=j", p.beta)):
        if abs(p.lam - v) <= tol:
            out.append(name)
    return tuple(out)


def _pe_windows(p: FamilyParams):
    """Search windows for pseudo-equilibria.

    Every switch point of the family lies in ``[-1.5, 1.5]``; for the visible
    family the far saddle ``Q`` may lie well outside, so the tails are
    searched separately, out to the Cauchy bound of the numerator of ``H``
    (at least ``VIS_WINDOW``), to keep the central grid fine.
    """
    if p.tau == "vis":
        a2, b, c = _visible_quadratic(p.alpha, p.beta, p.lam)
        far = VIS_WINDOW
        if a2 != 0:
            far = max(far, 2.0 * (1.0 + max(abs(b), abs(c)) / abs(a2)))
        return [(-far, -1.5), (-1.5, 1.5), (1.5, far)]
    # the second (visible) fold of X at lam + 1 belongs to the global
    # extension of the normal form, not to the unfolding
    return [(-1.5, p.lam + 1.0)]


def _system_for(p: FamilyParams):
    lo = min([-1.5] + [w[0] for w in _pe_windows(p)])
    hi = max([1.5] + [w[1] for w in _pe_windows(p)])
    return make_system(p, domain=(lo, hi, -1.5, 1.5))


def _find_pseudo(p: FamilyParams):
    Z = _system_for(p)
    out = []
    for lo, hi in _pe_windows(p):
        out += [q for q in find_pseudo_equilibria(Z, lo, hi)
                if not any(abs(q.x - r.x) <= tolerances().fold_polish for r in out)]
    return sorted(out, key=lambda q: q.x)


def compute_structure(p: FamilyParams):
    """Numerically computed descriptors (independent of the decision table).

    Returns
    -------
    Descriptors
    pseudo : list of PseudoEquilibrium
    cycles : list of CanardCycle
    """
    pseudo = _find_pseudo(p)
    cycles = []
    if p.tau == "inv" and p.beta > tolerances().boundary:
        cycles = find_canard_cycles(p)
    conn = _connections(p)
    coin = _coincidences(p)
    graph = "h->j" in conn or (p.tau == "vis" and "d=i" in coin)
    d = Descriptors(_behavior(p.beta), tuple(q.kind.value for q in pseudo),
                    tuple(c.stability.value for c in cycles), conn, coin, graph)
    return d, pseudo, cycles


def classify_case(p: FamilyParams, cache: Optional[SaddleNodeCache] = None,
                  verify: bool = True) -> CaseLabel:
    """Case label of a parameter point, verified against computed structure.

    Raises
    ------
    StructuralMismatch
        If the computed structure differs from the table prediction.
    """
    th, idx, predicted, values = predict_case(p, cache)
    details = {"thresholds": {k: v for k, v in values.items()}}
    tol = tolerances().boundary
    if max(abs(p.lam), abs(p.beta), abs(p.mu)) <= tol:
        # every unfolding parameter vanishes: the fold-saddle itself
        details["organizing_center"] = True
        details["codimension"] = 3
    if not verify:
        return CaseLabel(th, idx, predicted, details)
    computed, pseudo, cycles = compute_structure(p)
    details["pseudo_equilibria"] = [{"x": q.x, "region": q.region.value,
                                     "kind": q.kind.value} for q in pseudo]
    details["cycles"] = [c.to_dict() for c in cycles]
    diffs = [f for f in ("pseudo_equilibria", "cycles", "connections",
                         "tangency_coincidences", "sigma_graph")
             if getattr(predicted, f) != getattr(computed, f)]
    if diffs:
        raise StructuralMismatch(
            f"{th}/{idx}: predicted and computed structure differ in {diffs}",
            predicted=predicted.to_dict(),
            computed={**computed.to_dict(), "details": details}, label=idx)
    return CaseLabel(th, idx, computed, details)


# ---------------------------------------------------------------------------
# Sigma-graphs
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class SigmaGraph:
    """Closed path made of orbit arcs and pieces of the switching line."""

    kind: str
    polyline: np.ndarray


def detect_sigma_graph(p: FamilyParams, n: int = 200) -> Optional[SigmaGraph]:
    """Sigma-graph of the parameter point, if any.

    For the invisible family the graph is the upper arc joining ``h`` to
    ``j``, closed through the saddle by its separatrices and the segment
    ``[h, j]`` of the line.  For the visible family with ``d = i`` the fold
    point is a common tangency and the graph is the separatrix loop
    ``d -> j -> S -> h -> d``.
    """
    tol = tolerances().boundary
    if not p.beta > tol:
        return None
    b = p.beta
    sep = np.linspace(0.0, 1.0, n)
    to_s = np.column_stack([b * (1.0 - sep), -b * sep])        # j -> S
    from_s = np.column_stack([-b * sep, -b * (1.0 - sep)])     # S -> h
    if p.tau == "inv" and "h->j" in _connections(p):
        xs = np.linspace(-b, b, n)
        ys = orbit_height_primitive("inv", xs - p.lam) - orbit_height_primitive("inv", -b - p.lam)
        ys[0] = ys[-1] = 0.0
        arc = np.column_stack([xs, ys])
        return SigmaGraph("loop", np.vstack([arc, to_s[1:], from_s[1:]]))
    if p.tau == "vis" and abs(p.lam - y_fold_x(p.alpha, b)) <= tol:
        seg1 = np.column_stack([np.linspace(p.lam, b, n), np.zeros(n)])
        seg2 = np.column_stack([np.linspace(-b, p.lam, n), np.zeros(n)])
        return SigmaGraph("fold_family", np.vstack([seg1, to_s[1:], from_s[1:], seg2[1:]]))
    return None


# ---------------------------------------------------------------------------
# Dynamics cross-checks
# ---------------------------------------------------------------------------

def pseudo_equilibrium_attracts_forward(p: FamilyParams, x: float,
                                        delta: Optional[float] = None,
                                        t_max: Optional[float] = None) -> bool:
    """Whether the forward sliding flow from ``x +- delta`` converges to ``x``.

    ``delta`` defaults to ``1e-3``, reduced to a quarter of the distance to
    the nearest end of the sliding or escaping interval holding ``x``.
    ``t_max`` defaults to ``200`` or ten e-folding times of the local rate
    ``|H'(x)|``, whichever is longer.  Convergence means both runs end
    closer than ``delta / 2``.
    """
    Z = _system_for(p)
    if delta is None:
        delta = 1e-3
        for iv in sigma_regions(Z):
            if iv.lo < x < iv.hi:
                delta = min(delta, 0.25 * min(x - iv.lo, iv.hi - x))
    if t_max is None:
        h = 0.1 * delta
        rate = abs(direction_function(Z, x + h) - direction_function(Z, x - h)) / (2 * h)
        t_max = max(200.0, 10.0 / rate) if rate > 0 else 200.0
    for s in (-1.0, 1.0):
        seg = slide(Z, x + s * delta, t_max)
        if abs(seg.points[-1, 1] - x) >= 0.5 * delta:
            return False
    return True


# ---------------------------------------------------------------------------
# Scans
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CellResult:
    """Outcome of one scan cell.

    ``status`` is ``"verified"``, ``"mismatch"``, ``"error"`` or
    ``"out_of_range"``.  ``label`` is set for verified cells; ``predicted``
    holds the table's case index when the table could be evaluated.
    """

    lam: float
    beta: float
    mu: float
    theorem: Optional[str]
    status: str
    label: Optional[CaseLabel] = None
    predicted: Optional[str] = None
    message: str = ""
    pseudo: tuple = ()

    @property
    def case_index(self) -> str:
        if self.label is not None:
            return self.label.case_index
        return "" if self.predicted is None else self.predicted

    def to_dict(self) -> dict:
        out = {"lambda": self.lam, "beta": self.beta, "mu": self.mu,
               "theorem": self.theorem, "status": self.status,
               "case_index": self.case_index, "message": self.message}
        if self.label is not None:
            out["label"] = self.label.to_dict()
        return out


def _classify_cell(args):
    tau, lam, beta, mu, cache = args
    try:
        p = FamilyParams(tau, lam, beta, mu)
    except ParameterError as exc:
        return CellResult(lam, beta, mu, None, "out_of_range", message=str(exc))
    th = which_theorem(tau, mu, beta)
    try:
        label = classify_case(p, cache)
        return CellResult(lam, beta, mu, th, "verified", label, label.case_index,
                          pseudo=tuple(label.details["pseudo_equilibria"]))
    except StructuralMismatch as exc:
        found = exc.computed.get("details", {}).get("pseudo_equilibria", [])
        return CellResult(lam, beta, mu, th, "mismatch", predicted=exc.label,
                          message=str(exc), pseudo=tuple(found))
    except (FoldSaddleError, ArithmeticError, ValueError) as exc:
        return CellResult(lam, beta, mu, th, "error", message=f"{type(exc).__name__}: {exc}")


@dataclass(eq=False)
class ScanResult:
    """Grid of classified cells plus explicit boundary samples.

    ``labels[i, j]`` is the :class:`CellResult` at ``beta_grid[i]``,
    ``lambda_grid[j]``; ``boundary_cells`` holds the cells placed exactly on
    threshold curves.
    """

    tau: str
    mu_rule: object
    lambda_grid: np.ndarray
    beta_grid: np.ndarray
    labels: np.ndarray
    boundary_cells: list = field(default_factory=list)

    def cells(self):
        yield from self.labels.ravel()
        yield from self.boundary_cells

    def distinct_labels(self, verified_only: bool = True):
        return sorted({c.case_index for c in self.cells()
                       if c.case_index and (c.status == "verified" or not verified_only)},
                      key=lambda s: int(s.split("_")[0]))

    def status_counts(self) -> dict:
        out = {}
        for c in self.cells():
            out[c.status] = out.get(c.status, 0) + 1
        return out

    def to_csv(self) -> str:
        """CSV rows ``lambda, beta, theorem, case_index, status`` of the grid."""
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["lambda", "beta", "theorem", "case_index", "status"])
        for c in self.labels.ravel():
            w.writerow([repr(c.lam), repr(c.beta), c.theorem or "", c.case_index, c.status])
        return buf.getvalue()

    def to_json(self) -> str:
        rule = self.mu_rule if isinstance(self.mu_rule, str) else list(self.mu_rule)
        return json.dumps({
            "tau": self.tau, "mu_rule": rule,
            "lambda_grid": [float(v) for v in self.lambda_grid],
            "beta_grid": [float(v) for v in self.beta_grid],
            "cells": [c.to_dict() for c in self.labels.ravel()],
            "boundary_cells": [c.to_dict() for c in self.boundary_cells],
            "distinct_labels": self.distinct_labels(),
        }, indent=1, default=float)


def _boundary_lambdas(tau, mu, beta, cache, lam_lo, lam_hi):
    """Threshold values of ``lambda`` at a given ``beta`` inside the range."""
    tol = tolerances().boundary
    alpha = mu - 1.0
    vals = []
    if beta < -tol:
        vals.append(y_fold_x(alpha, beta))
    elif beta <= tol:
        vals.append(0.0)
    else:
        vals += [-beta, beta, y_fold_x(alpha, beta)]
        if tau == "inv":
            th = which_theorem(tau, mu, beta)
            t = thresholds_L(beta) if th == "T1" else thresholds_M(alpha, beta)
            vals += list(t)
            s = cache.get(alpha, beta)
            if s is not None:
                vals.append(s)
            if th == "T1":
                vals.remove(y_fold_x(alpha, beta))  # equals L1 on this slice
    return sorted(v for v in set(vals) if lam_lo <= v <= lam_hi)


def scan(tau: str, mu_rule, lambda_range, beta_range, resolution, *,
         boundary: bool = True, workers: int = 1,
         cache: Optional[SaddleNodeCache] = None) -> ScanResult:
    """Classify every cell of a ``(lambda, beta)`` grid.

    Parameters
    ----------
    tau : {"inv", "vis"}
    mu_rule : str or tuple
        See :func:`slice_mu`.
    lambda_range, beta_range : tuple of float
        Closed ranges ``(lo, hi)``.
    resolution : int or tuple of int
        Grid points per axis (``n_lambda, n_beta``); at least 2.
    boundary : bool
        Also classify cells exactly on the threshold curves of every grid
        ``beta`` (and on the line ``beta = 0`` when it is in range).
    workers : int
        Number of worker processes; results do not depend on it.

    Returns
    -------
    ScanResult
    """
    n_lam, n_beta = (resolution, resolution) if np.isscalar(resolution) else resolution
    if n_lam < 2 or n_beta < 2:
        raise ParameterError("resolution must be at least 2 per axis")
    cache = SaddleNodeCache() if cache is None else cache
    lams = np.linspace(lambda_range[0], lambda_range[1], int(n_lam))
    betas = np.linspace(beta_range[0], beta_range[1], int(n_beta))
    # saddle-node values are computed once per column, before any fan-out
    if tau == "inv":
        extra_b = [0.0] if boundary and beta_range[0] < 0 < beta_range[1] else []
        for b in list(betas) + extra_b:
            if b > tolerances().boundary:
                try:
                    cache.get(slice_mu(mu_rule, b) - 1.0, b)
                except FoldSaddleError:
                    pass
    jobs = [(tau, float(l), float(b), slice_mu(mu_rule, b), cache) for b in betas for l in lams]
    bjobs = []
    if boundary:
        bs = list(betas)
        if beta_range[0] < 0 < beta_range[1] and not np.any(np.abs(betas) <= tolerances().boundary):
            bs.append(0.0)
            bjobs += [(tau, float(l), 0.0, slice_mu(mu_rule, 0.0), cache) for l in lams]
        for b in bs:
            mu = slice_mu(mu_rule, b)
            try:
                bl = _boundary_lambdas(tau, mu, b, cache, lambda_range[0], lambda_range[1])
            except FoldSaddleError:
                bl = []
            bjobs += [(tau, float(l), float(b), mu, cache) for l in bl]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            cells = list(pool.map(_classify_cell, jobs, chunksize=8))
            bcells = list(pool.map(_classify_cell, bjobs, chunksize=8))
    else:
        cells = [_classify_cell(j) for j in jobs]
        bcells = [_classify_cell(j) for j in bjobs]
    grid = np.empty((betas.size, lams.size), dtype=object)
    for k, c in enumerate(cells):
        grid[k // lams.size, k % lams.size] = c
    return ScanResult(tau, mu_rule, lams, betas, grid, bcells)


def theorem_slice(theorem: str):
    """``(tau, mu_rule)`` of the default scan slice of a theorem."""
    tau, kind, value = _SLICE_RULES[theorem]
    return tau, ("mu0_curve" if kind == "mu0_curve" else (kind, value))
