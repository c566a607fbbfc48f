"""Exact geometric predicates over snapped dyadic coordinates.

Floating inputs are snapped to a dyadic grid x -> round(x * 2^S) / 2^S at
ingestion; the snapped doubles and the scaled integers represent the same
point exactly, so every predicate here is an integer determinant sign.

Cospherical ties are broken by a symbolic perturbation of the paraboloid
lift: point x gets height |x|^2 + rho^phi(x) with injective phi >= 2, and the
in-sphere determinant becomes a polynomial in rho whose sign as rho -> 0+ is
the sign of its first nonvanishing coefficient in ascending powers.
"""

from __future__ import annotations

import math
from fractions import Fraction

__all__ = [
    "snap_scale",
    "snap_value",
    "det_int",
    "orient_int",
    "insphere_terms",
    "insphere_sign",
    "sos_inside",
    "simplex_volume_fraction",
]


def snap_scale(max_abs: float) -> int:
    """Exponent S so that coordinates up to max_abs snap near 2^50 ULP."""
    if max_abs <= 0.0 or not math.isfinite(max_abs):
        return 50
    return max(8, min(52, 50 - max(0, math.ceil(math.log2(max_abs)))))


def snap_value(x: float, scale_exp: int) -> tuple[int, float]:
    """(integer, snapped double) for x on the 2^-scale_exp grid."""
    q = round(x * (1 << scale_exp))
    return q, q / float(1 << scale_exp)


def det_int(rows: list[tuple[int, ...]]) -> int:
    """Exact determinant of a small square integer matrix (Laplace expansion)."""
    n = len(rows)
    if n == 1:
        return rows[0][0]
    if n == 2:
        return rows[0][0] * rows[1][1] - rows[0][1] * rows[1][0]
    if n == 3:
        a, b, c = rows[0]
        d, e, f = rows[1]
        g, h, i = rows[2]
        return a * (e * i - f * h) - b * (d * i - f * g) + c * (d * h - e * g)
    total = 0
    for j in range(n):
        if rows[0][j] == 0:
            continue
        minor = [r[:j] + r[j + 1 :] for r in rows[1:]]
        term = rows[0][j] * det_int(minor)
        total += term if j % 2 == 0 else -term
    return total


def _sign(x: int) -> int:
    return (x > 0) - (x < 0)


def orient_int(points: list[tuple[int, ...]]) -> int:
    """Sign of det[p_1 - p_0, ..., p_d - p_0] for d+1 points in Z^d."""
    p0 = points[0]
    rows = [tuple(p[i] - p0[i] for i in range(len(p0))) for p in points[1:]]
    g = 0
    for row in rows:
        for c in row:
            g = math.gcd(g, c)
    if g > 1:
        rows = [tuple(c // g for c in row) for row in rows]
    return _sign(det_int(rows))


def _reduced_insphere_rows(simplex: list[tuple[int, ...]], q: tuple[int, ...]):
    """Difference rows u_i = p_i - q with lift |u_i|^2, gcd-reduced.

    Column operations turn the usual lift |p_i|^2 - |q|^2 = |u_i|^2 + 2 u_i.q
    into |u_i|^2 without changing the determinant (the 2 u_i.q part is a
    combination of the coordinate columns).  Dividing every u_i by the common
    gcd g scales the determinant and all lift cofactors by positive powers of
    g, so signs are unchanged; on lattice-like inputs this shrinks the
    integers to machine size.
    """
    d = len(q)
    base = [tuple(p[i] - q[i] for i in range(d)) for p in simplex]
    g = 0
    for row in base:
        for c in row:
            g = math.gcd(g, c)
    if g > 1:
        base = [tuple(c // g for c in row) for row in base]
    lifts = [sum(c * c for c in row) for row in base]
    return base, lifts


def insphere_terms(simplex: list[tuple[int, ...]], q: tuple[int, ...]) -> tuple[int, list[int]]:
    """Unperturbed in-sphere determinant and its lift-column cofactors.

    Returns (D0, [C_0..C_d]) where C_i is the cofactor of row i's lift entry,
    so for perturbed heights the determinant is
    D0 + sum_i rho^phi(p_i) C_i - rho^phi(q) sum_i C_i.  Both are rescaled by
    a positive factor (see _reduced_insphere_rows); only signs are meaningful.
    """
    d = len(q)
    base, lifts = _reduced_insphere_rows(simplex, q)
    rows = [base[i] + (lifts[i],) for i in range(d + 1)]
    d0 = det_int(rows)
    cofs = []
    for i in range(d + 1):
        minor = [base[j] for j in range(d + 1) if j != i]
        cof = det_int(minor)
        if (i + d) % 2 == 1:
            cof = -cof
        cofs.append(cof)
    return d0, cofs


def insphere_sign(simplex: list[tuple[int, ...]], q: tuple[int, ...]) -> int:
    """+1 iff q strictly inside the circumsphere of a POSITIVELY oriented
    simplex, -1 strictly outside, 0 cospherical.  Multiply by the simplex
    orientation sign for arbitrary vertex order.  The raw determinant
    satisfies D = delta * (-1)^d * orient with delta > 0 inside, hence the
    dimension-parity factor.
    """
    d = len(q)
    base, lifts = _reduced_insphere_rows(simplex, q)
    rows = [base[i] + (lifts[i],) for i in range(d + 1)]
    parity = -1 if d % 2 else 1
    return _sign(det_int(rows)) * parity


def sos_inside(
    simplex: list[tuple[int, ...]],
    simplex_phi: list[int],
    q: tuple[int, ...],
    q_phi: int,
    orient_sign: int,
) -> bool:
    """Is q strictly inside the perturbed circumsphere of the simplex?

    orient_sign is the orientation of the simplex vertex order as passed.
    Strictness is guaranteed: the perturbed configuration has no cospherical
    (d+2)-subsets as long as the simplex itself is nondegenerate.
    """
    d0, cofs = insphere_terms(simplex, q)
    terms = [(0, d0)]
    terms.extend(zip(simplex_phi, cofs))
    terms.append((q_phi, -sum(cofs)))
    terms.sort(key=lambda t: t[0])
    parity = -1 if len(q) % 2 else 1
    for _, coef in terms:
        if coef != 0:
            return coef * orient_sign * parity > 0
    raise ArithmeticError("degenerate in-sphere query: simplex has no volume")


def simplex_volume_fraction(points: list[tuple[int, ...]], scale_exp: int) -> Fraction:
    """Exact simplex volume |det| / d! as a Fraction in original units."""
    d = len(points[0])
    p0 = points[0]
    rows = [tuple(p[i] - p0[i] for i in range(d)) for p in points[1:]]
    det = abs(det_int(rows))
    return Fraction(det, math.factorial(d)) / (Fraction(1 << scale_exp) ** d)
