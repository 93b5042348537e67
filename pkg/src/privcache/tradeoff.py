"""Exact memory-rate tradeoff computations and the optimality-gap certificate.

Achievable side: the scheme's (M, R) pairs for every placement knob r, and
their lower convex envelope (memory sharing).  Converse side: a family of
linear bounds indexed by (s, lambda) with a minimal auxiliary index t, and
the corner-point envelope they generate, built from the points
((N - L(t-1))/s, L((s-1)/2 + t(t-1)/(2s))) together with (0, L*floor(n_active/L)).

Everything is a Fraction; dominance and gap checks are exact comparisons.
The certificate confirms that the achievable envelope is within a factor of
6 of the corner-point lower envelope at every audited memory point.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field
from fractions import Fraction
from typing import Iterable

from .exact import Envelope, binomial, lower_convex_envelope

GAP_FACTOR = 6


class OptimalityGapError(RuntimeError):
    """The certified gap bound failed; indicates an implementation bug."""


def _validate_dims(n_files: int, n_users: int, demands_per_user: int):
    if n_files < 1 or n_users < 1:
        raise ValueError("need at least one file and one user")
    if not 1 <= demands_per_user <= n_files:
        raise ValueError("demands per user must lie in [1, n_files]")


def active_files(n_files: int, n_users: int, demands_per_user: int) -> int:
    return min(n_files, n_users * demands_per_user)


@dataclass(frozen=True)
class TradeoffPoint:
    m: Fraction
    rate: Fraction
    provenance: str


def achievable_points(n_files: int, n_users: int, demands_per_user: int) -> list[TradeoffPoint]:
    """The scheme's exact (M, R) pair for every r in [0, K * n_active]."""
    _validate_dims(n_files, n_users, demands_per_user)
    kv = n_users * active_files(n_files, n_users, demands_per_user)
    n_act = active_files(n_files, n_users, demands_per_user)
    out = []
    for r in range(kv + 1):
        denom = binomial(kv, r)
        m = Fraction((binomial(kv, r) - binomial(kv - demands_per_user, r)) * n_files, denom)
        rate = Fraction(binomial(kv, r + 1) - binomial(kv - n_act, r + 1), denom)
        out.append(TradeoffPoint(m, rate, f"achievable r={r}"))
    return out


def achievable_envelope(n_files: int, n_users: int, demands_per_user: int) -> Envelope:
    pts = achievable_points(n_files, n_users, demands_per_user)
    return lower_convex_envelope((p.m, p.rate) for p in pts)


# ---------------------------------------------------------------------------
# Converse bounds
# ---------------------------------------------------------------------------


def max_converse_s(n_files: int, n_users: int, demands_per_user: int) -> int:
    return min(n_files // demands_per_user, n_users)


def min_feasible_t(n_files: int, demands_per_user: int, s: int, lam: Fraction) -> int:
    """Smallest t in [1, s] satisfying the feasibility inequality
    L*(s(s-1) - t(t-1) + 2*lam*s) <= 2*(N - (t-1)L)*t; t = s always works."""
    big_l = demands_per_user
    for t in range(1, s + 1):
        lhs = big_l * (s * (s - 1) - t * (t - 1) + 2 * lam * s)
        rhs = 2 * (n_files - (t - 1) * big_l) * t
        if lhs <= rhs:
            return t
    raise RuntimeError(f"no feasible t for s={s}, lambda={lam}; t=s should always satisfy the condition")


@dataclass(frozen=True)
class ConverseLine:
    """One linear converse bound R >= intercept + slope * M on [0, N]."""

    s: int
    lam: Fraction
    t: int
    intercept: Fraction
    slope: Fraction

    def value_at(self, m) -> Fraction:
        return self.intercept + self.slope * Fraction(m)


def converse_line(n_files: int, n_users: int, demands_per_user: int, s: int, lam) -> ConverseLine:
    _validate_dims(n_files, n_users, demands_per_user)
    lam = Fraction(lam)
    s_max = max_converse_s(n_files, n_users, demands_per_user)
    if not 1 <= s <= s_max:
        raise ValueError(f"s={s} outside [1, {s_max}]")
    if not 0 <= lam <= 1:
        raise ValueError(f"lambda={lam} outside [0, 1]")
    big_l = demands_per_user
    t = min_feasible_t(n_files, big_l, s, lam)
    intercept = (s - 1 + lam) * big_l
    slope = -Fraction(big_l, 1) * (2 * lam * s + s * (s - 1) - t * (t - 1)) / (2 * (n_files - big_l * (t - 1)))
    return ConverseLine(s=s, lam=lam, t=t, intercept=intercept, slope=slope)


def corner_points(n_files: int, n_users: int, demands_per_user: int) -> list[TradeoffPoint]:
    """Anchor points of the converse envelope over s in [1, s_max], t in [1, s]."""
    _validate_dims(n_files, n_users, demands_per_user)
    big_l = demands_per_user
    out = []
    for s in range(1, max_converse_s(n_files, n_users, demands_per_user) + 1):
        for t in range(1, s + 1):
            m = Fraction(n_files - big_l * (t - 1), s)
            rate = big_l * (Fraction(s - 1, 2) + Fraction(t * (t - 1), 2 * s))
            out.append(TradeoffPoint(m, rate, f"corner s={s},t={t}"))
    return out


def converse_corner_envelope(n_files: int, n_users: int, demands_per_user: int) -> Envelope:
    """Lower convex envelope of the corner points plus the zero-memory point
    (0, L * floor(n_active / L)); a certified lower bound on the optimal rate."""
    n_act = active_files(n_files, n_users, demands_per_user)
    pts = [(p.m, p.rate) for p in corner_points(n_files, n_users, demands_per_user)]
    pts.append((Fraction(0), Fraction(demands_per_user * (n_act // demands_per_user))))
    return lower_convex_envelope(pts)


def lambda_grid(step: Fraction = Fraction(1, 8)) -> list[Fraction]:
    step = Fraction(step)
    if not 0 < step <= 1:
        raise ValueError("lambda step must lie in (0, 1]")
    grid = []
    lam = Fraction(0)
    while lam < 1:
        grid.append(lam)
        lam += step
    grid.append(Fraction(1))
    return grid


# ---------------------------------------------------------------------------
# Dominance and gap certificates
# ---------------------------------------------------------------------------


def memory_grid(n_files: int, grid_size: int = 101) -> list[Fraction]:
    if grid_size < 2:
        raise ValueError("grid needs at least two points")
    return [Fraction(j * n_files, grid_size - 1) for j in range(grid_size)]


@dataclass
class DominanceReport:
    ok: bool
    checked_points: int
    violations: list[tuple] = dc_field(default_factory=list)
    lines_above_corner_envelope: list[tuple] = dc_field(default_factory=list)


def envelope_dominates(lower: Envelope, upper: Envelope, grid: Iterable[Fraction]) -> list[tuple]:
    """Grid points where `lower` exceeds `upper` (empty when dominance holds)."""
    out = []
    for m in grid:
        lo, up = lower.value_at(m), upper.value_at(m)
        if lo > up:
            out.append((m, lo, up))
    return out


def verify_envelope_dominance(n_files: int, n_users: int, demands_per_user: int,
                              grid_size: int = 101, lambda_step: Fraction = Fraction(1, 8)) -> DominanceReport:
    """Exact sandwich check on a memory grid: the corner envelope and every
    (s, lambda)-line must lie weakly below the achievable envelope.

    A line rising above the corner envelope somewhere is not an error (it just
    means the line is locally the tighter bound); those events are reported
    informationally.
    """
    ach = achievable_envelope(n_files, n_users, demands_per_user)
    low = converse_corner_envelope(n_files, n_users, demands_per_user)
    grid = memory_grid(n_files, grid_size)
    report = DominanceReport(ok=True, checked_points=0)
    for m, lo, up in envelope_dominates(low, ach, grid):
        report.violations.append((m, lo, up, "corner-envelope"))
    report.checked_points += len(grid)
    lines = [
        converse_line(n_files, n_users, demands_per_user, s, lam)
        for s in range(1, max_converse_s(n_files, n_users, demands_per_user) + 1)
        for lam in lambda_grid(lambda_step)
    ]
    for line in lines:
        above_corner = False
        for m in grid:
            v = line.value_at(m)
            if v > ach.value_at(m):
                report.violations.append((m, v, ach.value_at(m), f"line s={line.s},lam={line.lam}"))
            if not above_corner and v > low.value_at(m):
                above_corner = True
                report.lines_above_corner_envelope.append((line.s, line.lam, m))
        report.checked_points += len(grid)
    report.ok = not report.violations
    return report


@dataclass
class GapCertificate:
    n_files: int
    n_users: int
    demands_per_user: int
    max_ratio: Fraction
    witness_m: Fraction
    witness_provenance: str
    bound: int = GAP_FACTOR

    @property
    def within_bound(self) -> bool:
        return self.max_ratio <= self.bound


def gap_certificate(n_files: int, n_users: int, demands_per_user: int) -> GapCertificate:
    """Max of achievable_envelope(M) / corner_envelope(M) over the audited
    points: M = 0 and every corner point except (s, t) = (1, 1), whose memory
    equals N where both curves vanish (that ratio is defined as 1).

    Raises OptimalityGapError if any ratio exceeds the factor-6 bound or a
    positive rate sits over a zero lower bound away from M = N.
    """
    ach = achievable_envelope(n_files, n_users, demands_per_user)
    low = converse_corner_envelope(n_files, n_users, demands_per_user)
    n_act = active_files(n_files, n_users, demands_per_user)
    candidates: list[tuple[Fraction, str]] = [(Fraction(0), "endpoint M=0")]
    for p in corner_points(n_files, n_users, demands_per_user):
        if p.provenance != "corner s=1,t=1":
            candidates.append((p.m, p.provenance))
    best = Fraction(0)
    witness = (Fraction(0), "endpoint M=0")
    for m, prov in candidates:
        a = ach.value_at(m)
        b = low.value_at(m)
        if b == 0:
            if a == 0:
                ratio = Fraction(1)  # both schemes optimal at full memory
            else:
                raise OptimalityGapError(f"lower envelope vanished at M={m} with achievable rate {a}")
        else:
            ratio = a / b
        if ratio > best:
            best = ratio
            witness = (m, prov)
    if best > GAP_FACTOR:
        raise OptimalityGapError(
            f"gap {best} exceeds {GAP_FACTOR} at M={witness[0]} ({witness[1]}) "
            f"for (N,K,L)=({n_files},{n_users},{demands_per_user})"
        )
    return GapCertificate(
        n_files=n_files,
        n_users=n_users,
        demands_per_user=demands_per_user,
        max_ratio=best,
        witness_m=witness[0],
        witness_provenance=witness[1],
    )


def gap_sweep(n_max: int = 8, k_max: int = 4) -> list[GapCertificate]:
    """Certificates for every (N, K, L) with N <= n_max, K <= k_max, L <= N,
    in lexicographic parameter order."""
    out = []
    for n in range(1, n_max + 1):
        for k in range(1, k_max + 1):
            for l in range(1, n + 1):
                out.append(gap_certificate(n, k, l))
    return out
