import json
import math

import numpy as np
import pytest
from scipy.optimize import brentq

from foldsaddle.core import (NsvfSystem, Region, classify_sigma_point, direction_function,
                             find_pseudo_equilibria, x_inv, y_saddle)
from foldsaddle.errors import EscapingStartError, NoBracketError, OutOfDomainError, ParameterError, RegionError
from foldsaddle.flow import (
    Regime,
    Termination,
    advance,
    find_connection_lambda,
    integrate_free,
    slide,
    trajectory_events_json,
    trajectory_to_csv,
)
from foldsaddle.normal_forms import (FamilyParams, alpha0, make_system, orbit_height_primitive,
                                     thresholds_L, thresholds_M, y_fold_x)


def _F(u):
    return orbit_height_primitive("inv", u)


def _saddle_landing(a, b, x0):
    # closed form in eigen-coordinates p = x + w, q = x - w, w = y + b
    p0, q0 = x0 + b, x0 - b

    def g(t):
        return p0 * math.exp(a * t) - q0 * math.exp(t) - 2 * b

    t = brentq(g, 1e-3, 40.0, xtol=1e-15)
    return 0.5 * (p0 * math.exp(a * t) + q0 * math.exp(t))


def test_free_upper_matches_quadrature():
    seg = integrate_free(x_inv(0.0), (-0.4, 0.0), "upper", 10.0)
    assert seg.termination is Termination.HIT_SIGMA
    x1 = seg.end[0]
    assert _F(x1) == pytest.approx(_F(-0.4), abs=1e-9)
    assert x1 == pytest.approx(0.572508278236462515, abs=1e-9)
    assert abs(seg.end[1]) <= 1e-12
    # every sample lies on the level curve y = F(x) - F(x0)
    xs, ys = seg.points[:, 1], seg.points[:, 2]
    assert np.max(np.abs(ys - (_F(xs) - _F(-0.4)))) < 1e-8
    assert np.all(ys >= -1e-12)
    assert np.all(np.diff(seg.points[:, 0]) > 0)


def test_free_lower_matches_eigen_closed_form():
    seg = integrate_free(y_saddle(-1.0, 0.5), (0.4, 0.0), "lower", 50.0)
    assert seg.termination is Termination.HIT_SIGMA
    assert seg.end[0] == pytest.approx(_saddle_landing(-1.0, 0.5, 0.4), abs=1e-9)
    assert np.all(seg.points[:, 2] <= 1e-12)


def test_free_lower_escapes_beyond_stable_foot():
    seg = integrate_free(y_saddle(-1.0, 0.5), (0.6, 0.0), "lower", 50.0,
                         domain=(-1.5, 1.5, -1.5, 1.5))
    assert seg.termination is Termination.LEFT_DOMAIN


def test_free_time_reversal_returns_to_start():
    fld = x_inv(0.1)
    seg = integrate_free(fld, (-0.3, 0.2), "upper", 0.5)
    rev = integrate_free(_reverse(fld), seg.end, "upper", 0.5)
    assert rev.end == pytest.approx((-0.3, 0.2), abs=1e-8)


def _reverse(fld):
    from foldsaddle.core import custom_field
    return custom_field(lambda x, y: tuple(-v for v in fld(x, y)),
                        lambda x, y: -fld.lie(x, y, 1), None)


def test_free_time_budget():
    seg = integrate_free(x_inv(0.0), (-0.4, 0.0), "upper", 0.1)
    assert seg.termination is Termination.TIME_BUDGET
    assert seg.t_end == pytest.approx(0.1)


def test_advance_crossing_event():
    Z = NsvfSystem(x_inv(0.0), y_saddle(-1.0, 0.0))
    traj = advance(Z, (0.5, 0.01), 3.0)
    kinds = [e[1] for e in traj.events]
    assert kinds[0] == "crossing"
    assert [s.regime for s in traj.segments[:2]] == [Regime.FREE_X, Regime.FREE_Y]
    xc = traj.events[0][2]
    assert classify_sigma_point(Z, xc).region is Region.CROSSING
    # junction shared by consecutive segments
    assert traj.segments[0].end == pytest.approx(traj.segments[1].start)


def test_advance_case_7_1_converges_to_sigma_attractor():
    b = 0.5
    p = FamilyParams.from_alpha("inv", -0.7, b, alpha0(b))
    Z = make_system(p)
    [P] = find_pseudo_equilibria(Z, -1.5, p.lam + 1.0)
    traj = advance(Z, (-0.5, 0.05), 200.0)
    assert traj.termination is Termination.REACHED_PSEUDO_EQUILIBRIUM
    assert abs(traj.end[0] - P.x) <= 1e-6
    assert "sliding_entry" in [e[1] for e in traj.events]


def test_advance_from_invisible_fold():
    # Y points down beyond the fold: the orbit grazes the line and crosses on
    Z = make_system(FamilyParams("inv", 0.2, 0.0, 0.0))
    traj = advance(Z, (0.2, 0.0), 0.5)
    assert traj.events[0][1] == "tangency"
    assert traj.segments[0].regime is Regime.FREE_Y
    assert traj.segments[0].points[-1, 1] > 0.2


def test_advance_from_invisible_fold_into_sliding():
    # Y points up beyond the fold: the grazing orbit is caught by the sliding region
    Z = make_system(FamilyParams.from_alpha("inv", -0.2, 0.5, -0.5))
    traj = advance(Z, (-0.2, 0.0), 0.5)
    assert traj.events[0][1] == "tangency"
    assert traj.segments[0].regime is Regime.SLIDING


def test_advance_refuses_escaping_start():
    Z = make_system(FamilyParams.from_alpha("vis", -0.6, 0.5, -1.0))
    with pytest.raises(EscapingStartError):
        advance(Z, (0.3, 0.0), 1.0)
    traj = advance(Z, (0.3, 0.0), 0.5, directive="go-up")
    assert traj.segments[0].regime is Regime.FREE_X
    with pytest.raises(OutOfDomainError):
        advance(Z, (5.0, 0.0), 1.0)
    with pytest.raises(ParameterError):
        advance(Z, (0.3, 0.0), 1.0, directive="sideways")


def test_advance_regimes_agree_with_sigma_classification():
    Z = make_system(FamilyParams.from_alpha("inv", -0.3, 0.4, -0.8))
    for seed in ((-0.9, 0.3), (0.2, -0.1), (-0.4, 0.05), (0.5, 0.2)):
        traj = advance(Z, seed, 20.0)
        for seg, nxt in zip(traj.segments, traj.segments[1:]):
            if nxt.regime is Regime.SLIDING:
                x = nxt.start[0]
                assert classify_sigma_point(Z, x).region in (Region.SLIDING, Region.ESCAPING,
                                                             Region.PSEUDO_EQUILIBRIUM)
            if seg.regime is not Regime.SLIDING and nxt.regime is not Regime.SLIDING \
                    and seg.regime is not nxt.regime:
                assert classify_sigma_point(Z, seg.end[0]).region is Region.CROSSING


def test_slide_moves_monotonically_to_root():
    b = 0.5
    p = FamilyParams.from_alpha("inv", -0.7, b, alpha0(b))
    Z = make_system(p)
    [P] = find_pseudo_equilibria(Z, -1.5, p.lam + 1.0)
    x0 = (p.lam + P.x) / 2
    assert direction_function(Z, x0) > 0
    seg = slide(Z, x0, 200.0)
    assert np.all(np.diff(seg.points[:, 1]) >= 0)
    assert seg.termination is Termination.REACHED_PSEUDO_EQUILIBRIUM
    assert abs(direction_function(Z, seg.end[0])) < 1e-9


def test_slide_exits_at_fold_when_no_root():
    # behavior Y-: H > 0 on the sliding interval, slide ends at its right end
    p = FamilyParams.from_alpha("inv", -0.4, -0.3, -0.5)
    Z = make_system(p)
    e1 = y_fold_x(p.alpha, p.beta)
    xs = np.linspace(p.lam, e1, 50)[1:-1]
    assert np.all(direction_function(Z, xs) > 0)
    x0 = (p.lam + e1) / 2
    seg = slide(Z, x0, 100.0)
    assert seg.termination is Termination.REACHED_FOLD
    assert seg.where == pytest.approx(e1, abs=1e-8)


def test_slide_runs_on_escaping_region():
    Z = make_system(FamilyParams.from_alpha("vis", -0.6, 0.5, -1.0))
    seg = slide(Z, 0.3, 0.5)
    assert seg.regime is Regime.SLIDING
    with pytest.raises(RegionError):
        slide(Z, -0.3, 1.0)


@pytest.mark.parametrize("b", [0.1, 0.3, 0.5, 0.7])
@pytest.mark.parametrize("which", ["alpha0", -1.0, -0.5])
def test_connection_lambda_matches_closed_forms(b, which):
    a = alpha0(b) if which == "alpha0" else which
    m = thresholds_M(a, b)
    for k, pair in enumerate(("h->i", "h->j", "i->j")):
        assert find_connection_lambda(a, b, pair) == pytest.approx(m[k], abs=1e-9)
    if which == "alpha0":
        el = thresholds_L(b)
        for k, pair in enumerate(("h->i", "h->j", "i->j")):
            assert find_connection_lambda(a, b, pair) == pytest.approx(el[k], abs=1e-9)


def test_connection_examples():
    assert find_connection_lambda(-0.3, 0.5, "h->j") == pytest.approx(
        -0.5 + math.sqrt(6) / 6, abs=1e-9)
    lam = find_connection_lambda(-1.0, 0.5, "i->j")
    assert _F(0.5 - lam) == pytest.approx(_F(-lam), abs=1e-12)
    with pytest.raises(ParameterError):
        find_connection_lambda(-1.0, 0.0, "h->j")
    with pytest.raises(ParameterError):
        find_connection_lambda(-1.0, 0.5, "h->q")


def test_connection_missing_for_large_beta():
    # the h->j arc passes the second, visible fold and never returns above the line
    with pytest.raises(NoBracketError):
        find_connection_lambda(-1.0, 0.85, "h->j")


def test_trajectory_serialization():
    Z = NsvfSystem(x_inv(0.0), y_saddle(-1.0, 0.0))
    traj = advance(Z, (0.5, 0.01), 3.0)
    text = trajectory_to_csv(traj)
    lines = text.strip().split("\n")
    assert lines[0] == "t,x,y,regime"
    assert len(lines) - 1 == len(traj.points())
    log = json.loads(trajectory_events_json(traj))
    assert log["events"][0]["kind"] == "crossing"
    assert log["segments"][0]["regime"] == "FreeX"
    assert trajectory_to_csv(traj) == text
