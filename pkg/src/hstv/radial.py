"""Second-order total variation of radial functions f(x) = g(|x|).

For a profile g that is piecewise smooth on (0, R) with derivative jumps at
breakpoints r_k, the p-Hessian total variation of f over the open ball B_r
splits into an atomic part carried by the spheres |x| = r_k and an absolutely
continuous part:

    htv_p(B_r) = d*omega_d * ( sum_{r_k < r} r_k^(d-1) |j_k|
                 + int_0^r || (s g''(s), g'(s), ..., g'(s)) ||_p s^(d-2) ds )

with g' repeated d-1 times and omega_d the unit-ball volume.  The profile is
stored as per-interval real-exponent monomial sums; derivative jumps are
derived from the pieces (g itself must be continuous).  Only atomic + a.c.
derivative measures are representable; singular-continuous parts are outside
the data model.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .quadrature import DivergenceError, gauss_legendre_adaptive

__all__ = [
    "RadialProfile",
    "HtvValue",
    "unit_ball_volume",
    "radial_htv",
    "cone_profile",
    "bump_profile",
    "eval_average_gap",
    "profile_from_json",
    "profile_to_json",
]

_CONT_TOL = 1e-12


def unit_ball_volume(d: int) -> float:
    """Lebesgue volume of the unit ball in R^d (pi for d=2, 4pi/3 for d=3)."""
    if d < 1:
        raise ValueError("dimension must be >= 1")
    if d == 2:
        return math.pi
    if d == 3:
        return 4.0 * math.pi / 3.0
    if d == 4:
        return math.pi * math.pi / 2.0
    return math.pi ** (d / 2.0) / math.gamma(d / 2.0 + 1.0)


@dataclass(frozen=True)
class Piece:
    """Monomial sum g(s) = sum c_k s^(e_k) on the open interval (lo, hi)."""

    lo: float
    hi: float
    coeffs: tuple[float, ...]
    exponents: tuple[float, ...]

    def value(self, s):
        s = np.asarray(s, dtype=float)
        out = np.zeros_like(s)
        for c, e in zip(self.coeffs, self.exponents):
            out += c * np.power(s, e)
        return out

    def d1(self, s):
        s = np.asarray(s, dtype=float)
        out = np.zeros_like(s)
        for c, e in zip(self.coeffs, self.exponents):
            if e != 0.0:
                out += c * e * np.power(s, e - 1.0)
        return out

    def d2(self, s):
        s = np.asarray(s, dtype=float)
        out = np.zeros_like(s)
        for c, e in zip(self.coeffs, self.exponents):
            if e != 0.0 and e != 1.0:
                out += c * e * (e - 1.0) * np.power(s, e - 2.0)
        return out

    def nonconstant_terms(self) -> list[tuple[float, float]]:
        return [(c, e) for c, e in zip(self.coeffs, self.exponents) if e != 0.0 and c != 0.0]


@dataclass(frozen=True)
class RadialProfile:
    """Piecewise monomial profile g on (0, R); R may be math.inf.

    pieces: list of (lo, hi, coeffs, exponents); consecutive pieces must share
    endpoints and agree there to 1e-12 (g continuous).  Derivative jumps at
    the interior breakpoints are derived, not supplied.
    """

    dim: int
    radius: float
    pieces: tuple[Piece, ...]
    jumps: tuple[tuple[float, float], ...] = field(init=False)

    def __post_init__(self):
        if self.dim < 2:
            raise ValueError("dimension must be >= 2")
        if not self.pieces:
            raise ValueError("profile needs at least one piece")
        prev_hi = 0.0
        for pc in self.pieces:
            if not (pc.lo == prev_hi and pc.hi > pc.lo):
                raise ValueError("pieces must tile (0, R) in order without gaps")
            prev_hi = pc.hi
        if prev_hi != self.radius:
            raise ValueError("pieces must end at R")
        jumps = []
        for left, right in zip(self.pieces, self.pieces[1:]):
            r = left.hi
            gl = float(left.value(r))
            gr = float(right.value(r))
            scale = 1.0 + abs(gl) + abs(gr)
            if abs(gl - gr) > _CONT_TOL * scale:
                raise ValueError(f"profile discontinuous at r={r}: {gl} vs {gr}")
            j = float(right.d1(r)) - float(left.d1(r))
            if abs(j) > _CONT_TOL:
                jumps.append((r, j))
        object.__setattr__(self, "jumps", tuple(jumps))

    def piece_at(self, s: float) -> Piece:
        for pc in self.pieces:
            if pc.lo <= s <= pc.hi:
                return pc
        raise ValueError(f"s={s} outside (0, {self.radius})")

    def value_at_zero(self) -> float:
        first = self.pieces[0]
        for c, e in zip(first.coeffs, first.exponents):
            if e < 0.0 and c != 0.0:
                raise ValueError("profile unbounded at 0")
        return sum(c for c, e in zip(first.coeffs, first.exponents) if e == 0.0)


@dataclass(frozen=True)
class HtvValue:
    """HTV over a ball, split into atomic (sphere jump) and a.c. parts."""

    value: float
    jump_part: float
    ac_part: float


def _lp_norm_components(x1, x2, mult: int, p: float):
    """|| (x1, x2 repeated mult times) ||_p, vectorized."""
    a1 = np.abs(x1)
    a2 = np.abs(x2)
    if math.isinf(p):
        return np.maximum(a1, a2)
    if p == 1.0:
        return a1 + mult * a2
    return (a1**p + mult * a2**p) ** (1.0 / p)


def _single_power_integral(c: float, e: float, d: int, p: float, lo: float, hi: float) -> float:
    """Closed form of int_lo^hi ||(s g'', g', ..)||_p s^(d-2) ds for g = c s^e.

    Both components are multiples of s^(e-1), so the norm collapses to
    |c e| * ||(e-1, 1, ..)||_p * s^(e+d-3); the antiderivative is exact.
    Diverges iff lo = 0 with exponent e+d-3 <= -1 or hi = inf with e+d-3 >= -1.
    """
    if c == 0.0 or e == 0.0:
        return 0.0
    k = e + d - 3.0
    factor = abs(c * e) * float(_lp_norm_components(e - 1.0, 1.0, d - 1, p))
    if lo == 0.0 and k <= -1.0:
        raise DivergenceError(f"monomial exponent {e} gives non-integrable curvature at 0 in d={d}")
    if math.isinf(hi) and k >= -1.0:
        raise DivergenceError("infinite radius with non-integrable tail")
    if k == -1.0:
        return factor * (math.log(hi) - math.log(lo))
    upper = 0.0 if math.isinf(hi) else hi ** (k + 1.0)
    lower = 0.0 if lo == 0.0 else lo ** (k + 1.0)
    return factor * (upper - lower) / (k + 1.0)


def _piece_ac_integral(pc: Piece, d: int, p: float, lo: float, hi: float, tol: float) -> float:
    """A.c. integrand integral over (lo, hi) subseteq piece support."""
    if hi <= lo:
        return 0.0
    terms = pc.nonconstant_terms()
    if not terms:
        return 0.0
    if len(terms) == 1:
        c, e = terms[0]
        return _single_power_integral(c, e, d, p, lo, hi)
    min_e = min(e for _, e in terms)
    if lo == 0.0 and min_e < 1.0 and not float(min_e).is_integer():
        raise ValueError(
            "piece touching 0 mixes a fractional exponent with other terms; "
            "no closed form and no stable quadrature available"
        )
    if math.isinf(hi):
        raise DivergenceError("infinite radius with non-flat tail")

    def integrand(s):
        return _lp_norm_components(s * pc.d2(s), pc.d1(s), d - 1, p) * np.power(s, d - 2)

    return gauss_legendre_adaptive(integrand, lo, hi, tol=tol)


def radial_htv(profile: RadialProfile, p, r: float) -> HtvValue:
    """HTV of x -> g(|x|) over the open ball of radius r, split by part.

    r may be math.inf when the profile has a flat tail.  Jumps at radii
    exactly equal to r lie on the sphere boundary and are excluded (open
    ball).
    """
    from .schatten import _as_p

    pv = _as_p(p)
    if r > profile.radius:
        raise ValueError(f"r={r} exceeds profile radius {profile.radius}")
    if r <= 0.0:
        return HtvValue(0.0, 0.0, 0.0)
    d = profile.dim
    front = d * unit_ball_volume(d)
    jump_part = front * sum(rk ** (d - 1) * abs(jk) for rk, jk in profile.jumps if rk < r)
    ac = 0.0
    tol = 1e-11
    for pc in profile.pieces:
        lo = pc.lo
        hi = min(pc.hi, r)
        if hi <= lo:
            break
        ac += _piece_ac_integral(pc, d, pv, lo, hi, tol)
    ac_part = front * ac
    return HtvValue(jump_part + ac_part, jump_part, ac_part)


def cone_profile(d: int = 2) -> RadialProfile:
    """g(s) = max(1 - s, 0): the unit cone; derivative jump +1 at s = 1."""
    return RadialProfile(
        dim=d,
        radius=math.inf,
        pieces=(
            Piece(0.0, 1.0, (1.0, -1.0), (0.0, 1.0)),
            Piece(1.0, math.inf, (0.0,), (0.0,)),
        ),
    )


def bump_profile(eps: float, d: int = 2) -> RadialProfile:
    """g(s) = max(1 - s^eps, 0) for eps in (0, 1]; jump +eps at s = 1."""
    if not (0.0 < eps <= 1.0):
        raise ValueError("eps must lie in (0, 1]")
    return RadialProfile(
        dim=d,
        radius=math.inf,
        pieces=(
            Piece(0.0, 1.0, (1.0, -1.0), (0.0, eps)),
            Piece(1.0, math.inf, (0.0,), (0.0,)),
        ),
    )


def _piece_moment(pc: Piece, lo: float, hi: float) -> float:
    """int_lo^hi s * g(s) ds in closed form (monomials integrate exactly)."""
    total = 0.0
    for c, e in zip(pc.coeffs, pc.exponents):
        k = e + 1.0
        # k > 0 since exponents > -1 are required for a finite average
        total += c * (hi ** (k + 1.0) - lo ** (k + 1.0)) / (k + 1.0)
    return total


def eval_average_gap(profile: RadialProfile, r: float) -> tuple[float, float, bool]:
    """Center-value vs ball-average gap and its curvature bound (d = 2).

    gap = |g(0+) - (2/r^2) int_0^r s g(s) ds|; the bound is
    htv_1(B_r)/(4 pi) + htv_1(B_2r minus closed B_r)/(2 pi).  Requires
    2r <= R and g bounded at 0.  Returns (gap, bound, holds).
    """
    if profile.dim != 2:
        raise ValueError("eval_average_gap is formulated for d = 2")
    if 2.0 * r > profile.radius:
        raise ValueError("need 2r <= R")
    if r <= 0.0:
        raise ValueError("need r > 0")
    g0 = profile.value_at_zero()
    moment = 0.0
    for pc in profile.pieces:
        lo = pc.lo
        hi = min(pc.hi, r)
        if hi <= lo:
            break
        moment += _piece_moment(pc, lo, hi)
    avg = 2.0 / (r * r) * moment
    gap = abs(g0 - avg)
    inner = radial_htv(profile, 1.0, r)
    outer = radial_htv(profile, 1.0, 2.0 * r)
    annulus = outer.value - inner.value - _sphere_jump_at(profile, r)
    bound = inner.value / (4.0 * math.pi) + annulus / (2.0 * math.pi)
    return gap, bound, gap <= bound + 1e-9


def _sphere_jump_at(profile: RadialProfile, r: float) -> float:
    d = profile.dim
    front = d * unit_ball_volume(d)
    for rk, jk in profile.jumps:
        if rk == r:
            return front * rk ** (d - 1) * abs(jk)
    return 0.0


def profile_to_json(profile: RadialProfile) -> dict:
    return {
        "dim": profile.dim,
        "R": "inf" if math.isinf(profile.radius) else profile.radius,
        "pieces": [
            {"from": pc.lo, "to": ("inf" if math.isinf(pc.hi) else pc.hi), "coeffs": list(pc.coeffs), "exponents": list(pc.exponents)}
            for pc in profile.pieces
        ],
        "jumps": [{"r": rk, "j": jk} for rk, jk in profile.jumps],
    }


def profile_from_json(obj) -> RadialProfile:
    if isinstance(obj, str):
        obj = json.loads(obj)
    radius = math.inf if obj["R"] in ("inf", None) else float(obj["R"])
    pieces = tuple(
        Piece(
            float(p["from"]),
            math.inf if p["to"] in ("inf", None) else float(p["to"]),
            tuple(float(c) for c in p["coeffs"]),
            tuple(float(e) for e in p["exponents"]),
        )
        for p in obj["pieces"]
    )
    prof = RadialProfile(dim=int(obj["dim"]), radius=radius, pieces=pieces)
    if "jumps" in obj and obj["jumps"] is not None:
        stated = sorted((float(j["r"]), float(j["j"])) for j in obj["jumps"])
        derived = sorted(prof.jumps)
        if len(stated) != len(derived) or any(
            abs(a[0] - b[0]) > 1e-9 or abs(a[1] - b[1]) > 1e-9 for a, b in zip(stated, derived)
        ):
            raise ValueError("stated derivative jumps disagree with the pieces")
    return prof
