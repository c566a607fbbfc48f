import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hstv.quadrature import DivergenceError
from hstv.radial import (
    Piece,
    RadialProfile,
    bump_profile,
    cone_profile,
    eval_average_gap,
    profile_from_json,
    profile_to_json,
    radial_htv,
    unit_ball_volume,
)

P_GRID = (1.0, 2.0, math.inf)


def cone_closed_form(d, p, r):
    om = unit_ball_volume(d)
    pinv = 0.0 if math.isinf(p) else 1.0 / p
    return d * om * ((d - 1) ** (pinv - 1.0) * min(r, 1.0) ** (d - 1) + (1.0 if r > 1.0 else 0.0))


def test_ball_volumes():
    assert unit_ball_volume(2) == pytest.approx(math.pi)
    assert unit_ball_volume(3) == pytest.approx(4.0 * math.pi / 3.0)
    assert unit_ball_volume(4) == pytest.approx(math.pi**2 / 2.0)


def test_cone_closed_form_grid():
    for d in (2, 3):
        prof = cone_profile(d)
        for p in P_GRID:
            for r in (0.5, 1.0, 2.0):
                got = radial_htv(prof, p, r).value
                want = cone_closed_form(d, p, r)
                assert abs(got - want) <= 1e-9 * max(1.0, abs(want))


def test_cone_full_plane_total_and_split():
    h = radial_htv(cone_profile(2), 1.0, math.inf)
    assert h.value == pytest.approx(4.0 * math.pi, abs=1e-9)
    assert h.jump_part == pytest.approx(2.0 * math.pi, abs=1e-9)
    assert h.ac_part == pytest.approx(2.0 * math.pi, abs=1e-9)


def test_cone_jump_excluded_on_sphere():
    # open ball of radius exactly 1 excludes the derivative jump at 1
    h = radial_htv(cone_profile(2), 1.0, 1.0)
    assert h.jump_part == 0.0
    assert h.value == pytest.approx(2.0 * math.pi, abs=1e-9)


def test_bump_p1_is_4pi_for_every_eps():
    for eps in (0.9, 0.5, 0.1, 0.01, 1e-3):
        v = radial_htv(bump_profile(eps), 1.0, math.inf).value
        assert v == pytest.approx(4.0 * math.pi, abs=1e-8)


def test_bump_family_closed_form_any_p():
    # 2*pi*( ||(eps(1-eps), eps)||_p / eps + eps ), decomposed jump+ac
    for eps in (0.3, 1e-2, 1e-3):
        for p in P_GRID:
            h = radial_htv(bump_profile(eps), p, math.inf)
            if math.isinf(p):
                comb = max(eps * (1.0 - eps), eps)
            else:
                comb = ((eps * (1.0 - eps)) ** p + eps**p) ** (1.0 / p)
            want = 2.0 * math.pi * (comb / eps + eps)
            assert h.value == pytest.approx(want, rel=1e-10)
            assert h.jump_part == pytest.approx(2.0 * math.pi * eps, rel=1e-12)


def test_bump_limit_2_pow_1p_pi():
    for p in (2.0, math.inf):
        v = radial_htv(bump_profile(1e-3), p, math.inf).value
        lim = 2.0 ** (1.0 + (0.0 if math.isinf(p) else 1.0 / p)) * math.pi
        assert abs(v - lim) / lim < 0.01


def test_profile_requires_continuity():
    with pytest.raises(ValueError, match="discontinuous"):
        RadialProfile(
            dim=2,
            radius=2.0,
            pieces=(Piece(0.0, 1.0, (0.0,), (0.0,)), Piece(1.0, 2.0, (1.0,), (0.0,))),
        )


def test_profile_derives_jumps():
    prof = cone_profile(2)
    assert len(prof.jumps) == 1
    rk, jk = prof.jumps[0]
    assert (rk, jk) == (1.0, pytest.approx(1.0))
    b = bump_profile(0.25)
    assert b.jumps[0][1] == pytest.approx(0.25)


def test_r_beyond_radius_rejected():
    prof = RadialProfile(dim=2, radius=1.0, pieces=(Piece(0.0, 1.0, (1.0, -1.0), (0.0, 2.0)),))
    with pytest.raises(ValueError, match="exceeds"):
        radial_htv(prof, 2.0, 1.5)


def test_divergent_profile_raises():
    prof = RadialProfile(dim=2, radius=1.0, pieces=(Piece(0.0, 1.0, (1.0,), (-0.5,)),))
    with pytest.raises(DivergenceError):
        radial_htv(prof, 1.0, 1.0)


def test_quadratic_profile_matches_hessian_integral():
    # g(s) = s^2/2 gives f = |x|^2/2 with Hessian = Id: htv_p(B_r) =
    # ||(1,...,1)||_p * vol(B_r) = d^(1/p) omega_d r^d.
    for d in (2, 3):
        prof = RadialProfile(dim=d, radius=2.0, pieces=(Piece(0.0, 2.0, (0.5,), (2.0,)),))
        for p in (1.0, 2.0):
            want = d ** (1.0 / p) * unit_ball_volume(d) * 1.5**d
            got = radial_htv(prof, p, 1.5).value
            assert got == pytest.approx(want, rel=1e-9)
        want = unit_ball_volume(d) * 1.5**d
        assert radial_htv(prof, math.inf, 1.5).value == pytest.approx(want, rel=1e-9)


def test_eval_average_gap_cone():
    gap, bound, holds = eval_average_gap(cone_profile(2), 0.5)
    assert gap == pytest.approx(1.0 / 3.0, abs=1e-9)
    assert holds
    assert bound == pytest.approx(0.25 + 0.5, abs=1e-9)


def test_eval_average_gap_affine_tight_zero():
    prof = RadialProfile(dim=2, radius=4.0, pieces=(Piece(0.0, 4.0, (3.0,), (0.0,)),))
    gap, bound, holds = eval_average_gap(prof, 1.0)
    assert gap == pytest.approx(0.0, abs=1e-12)
    assert bound == pytest.approx(0.0, abs=1e-12)
    assert holds


def test_eval_average_gap_validates():
    with pytest.raises(ValueError, match="2r"):
        eval_average_gap(RadialProfile(dim=2, radius=1.0, pieces=(Piece(0.0, 1.0, (1.0,), (2.0,)),)), 0.6)
    unbounded = RadialProfile(dim=2, radius=1.0, pieces=(Piece(0.0, 1.0, (1.0,), (-0.2,)),))
    with pytest.raises(ValueError, match="unbounded"):
        eval_average_gap(unbounded, 0.25)


def test_json_round_trip():
    prof = bump_profile(0.125)
    blob = json.dumps(profile_to_json(prof))
    back = profile_from_json(blob)
    assert back.dim == prof.dim
    assert back.jumps == prof.jumps
    for p in P_GRID:
        assert radial_htv(back, p, 2.0).value == pytest.approx(radial_htv(prof, p, 2.0).value, rel=1e-12)


def test_json_rejects_inconsistent_jumps():
    obj = profile_to_json(cone_profile(2))
    obj["jumps"] = [{"r": 1.0, "j": 5.0}]
    with pytest.raises(ValueError, match="disagree"):
        profile_from_json(obj)


def random_c1_profile(rng, radius=2.0):
    """Piecewise-polynomial profile built by integrating a random g'."""
    k = int(rng.integers(1, 5))
    cuts = np.sort(rng.uniform(0.15, radius - 0.15, size=k - 1)) if k > 1 else np.array([])
    bounds = np.concatenate([[0.0], cuts, [radius]])
    pieces = []
    g_at = rng.uniform(-1.0, 1.0)
    for i in range(k):
        lo, hi = float(bounds[i]), float(bounds[i + 1])
        dcoef = rng.uniform(-1.0, 1.0, size=3)  # g' coefficients on 1, s, s^2
        # integrate: g = c0 + dcoef[0] s + dcoef[1] s^2/2 + dcoef[2] s^3/3
        coeffs = [0.0, float(dcoef[0]), float(dcoef[1]) / 2.0, float(dcoef[2]) / 3.0]
        val_lo = sum(c * lo**e for c, e in zip(coeffs, range(4)))
        coeffs[0] = g_at - val_lo
        pieces.append(Piece(lo, hi, tuple(coeffs), (0.0, 1.0, 2.0, 3.0)))
        g_at = sum(c * hi**e for c, e in zip(coeffs, range(4)))
    return RadialProfile(dim=2, radius=radius, pieces=tuple(pieces))


def test_eval_average_gap_random_profiles():
    rng = np.random.default_rng(123)
    for _ in range(100):
        prof = random_c1_profile(rng)
        gap, bound, holds = eval_average_gap(prof, float(rng.uniform(0.05, 0.9)))
        assert holds, (gap, bound)


@settings(max_examples=40, deadline=None)
@given(st.integers(min_value=0, max_value=2**31 - 1), st.floats(min_value=0.05, max_value=0.9))
def test_eval_average_gap_property(seed, r):
    rng = np.random.default_rng(seed)
    prof = random_c1_profile(rng)
    gap, bound, holds = eval_average_gap(prof, r)
    assert holds


def test_htv_monotone_in_radius():
    rng = np.random.default_rng(99)
    prof = random_c1_profile(rng)
    vals = [radial_htv(prof, 2.0, r).value for r in (0.25, 0.5, 1.0, 1.9)]
    assert all(b >= a - 1e-12 for a, b in zip(vals, vals[1:]))
