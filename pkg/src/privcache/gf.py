"""Prime-field symbol arithmetic and exact linear algebra.

Field elements are plain Python ints reduced mod q (no lazy reduction, no
log tables: exactness over speed at desk scale).  The default modulus used
by the caching scheme is 257; q = 2 is fully supported so privacy audits can
enumerate every library realization.

Gaussian elimination carries explicit status reporting and never returns a
silently wrong answer on singular or inconsistent systems.  A multi-RHS
variant extracts the exact values of a chosen subset of unknowns from a
system that is underdetermined overall, which is what a cache-aided decoder
needs: the broadcast pins down the requested file without pinning down
every subfile it was coded with.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

# Deterministic Miller-Rabin witnesses, valid for all n < 3.3e24.
_MR_BASES = (2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37)


def is_prime(n: int) -> bool:
    if n < 2:
        return False
    small = (2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37)
    if n in small:
        return True
    if any(n % p == 0 for p in small):
        return False
    d, s = n - 1, 0
    while d % 2 == 0:
        d //= 2
        s += 1
    for a in _MR_BASES:
        x = pow(a, d, n)
        if x in (1, n - 1):
            continue
        for _ in range(s - 1):
            x = (x * x) % n
            if x == n - 1:
                break
        else:
            return False
    return True


@dataclass(frozen=True)
class PrimeField:
    """The field of integers mod q, q prime (checked at construction)."""

    q: int

    def __post_init__(self):
        if not is_prime(self.q):
            raise ValueError(f"modulus {self.q} is not prime")

    def reduce(self, a: int) -> int:
        return a % self.q

    def add(self, a: int, b: int) -> int:
        return (a + b) % self.q

    def sub(self, a: int, b: int) -> int:
        return (a - b) % self.q

    def mul(self, a: int, b: int) -> int:
        return (a * b) % self.q

    def neg(self, a: int) -> int:
        return (-a) % self.q

    def inv(self, a: int) -> int:
        if a % self.q == 0:
            raise ZeroDivisionError("inverse of 0 in a prime field")
        return pow(a, self.q - 2, self.q)


@dataclass(frozen=True)
class SymbolVector:
    """Fixed-length vector of field symbols; every entry reduced into [0, q)."""

    field: PrimeField
    entries: tuple[int, ...]

    def __post_init__(self):
        q = self.field.q
        if any(not (0 <= e < q) for e in self.entries):
            raise ValueError("symbol outside [0, q)")

    def __len__(self) -> int:
        return len(self.entries)

    def _check_peer(self, other: "SymbolVector"):
        if self.field != other.field or len(self) != len(other):
            raise ValueError("mismatched vectors")

    def __add__(self, other: "SymbolVector") -> "SymbolVector":
        self._check_peer(other)
        q = self.field.q
        return SymbolVector(self.field, tuple((a + b) % q for a, b in zip(self.entries, other.entries)))

    def __sub__(self, other: "SymbolVector") -> "SymbolVector":
        self._check_peer(other)
        q = self.field.q
        return SymbolVector(self.field, tuple((a - b) % q for a, b in zip(self.entries, other.entries)))


class InconsistentSystemError(ValueError):
    """The linear system has no solution."""


def rref(field: PrimeField, rows: list[list[int]], n_coef: int) -> list[int]:
    """Reduced row echelon form in place over the first ``n_coef`` columns.

    Columns beyond ``n_coef`` ride along as right-hand sides.  Returns the
    list of pivot columns; after the call, row i holds pivot i.
    """
    q = field.q
    pivots: list[int] = []
    rank = 0
    for col in range(n_coef):
        pivot_row = None
        for i in range(rank, len(rows)):
            if rows[i][col] % q:
                pivot_row = i
                break
        if pivot_row is None:
            continue
        rows[rank], rows[pivot_row] = rows[pivot_row], rows[rank]
        head = rows[rank][col] % q
        if head != 1:
            s = field.inv(head)
            rows[rank] = [(x * s) % q for x in rows[rank]]
        prow = rows[rank]
        for i in range(len(rows)):
            if i != rank and rows[i][col] % q:
                f = rows[i][col] % q
                rows[i] = [(a - f * b) % q for a, b in zip(rows[i], prow)]
        pivots.append(col)
        rank += 1
    return pivots


def _as_rows(field: PrimeField, matrix: Sequence[Sequence[int]], rhs_rows: Sequence[Sequence[int]]) -> tuple[list[list[int]], int]:
    if len(matrix) != len(rhs_rows):
        raise ValueError("matrix and right-hand side row counts differ")
    n_coef = len(matrix[0]) if matrix else 0
    rows = []
    for coef, rhs in zip(matrix, rhs_rows):
        if len(coef) != n_coef:
            raise ValueError("ragged matrix")
        rows.append([field.reduce(x) for x in coef] + [field.reduce(x) for x in rhs])
    return rows, n_coef


def gaussian_solve(field: PrimeField, matrix: Sequence[Sequence[int]], rhs: Iterable[int]):
    """Solve A x = b over the field.

    Returns ("unique", x) when A has full column rank on a consistent system,
    ("underdetermined", None) or ("inconsistent", None) otherwise.
    """
    b = list(rhs.entries) if isinstance(rhs, SymbolVector) else list(rhs)
    rows, n_coef = _as_rows(field, matrix, [[x] for x in b])
    pivots = rref(field, rows, n_coef)
    for row in rows[len(pivots):]:
        if row[-1] % field.q:
            return ("inconsistent", None)
    if len(pivots) < n_coef:
        return ("underdetermined", None)
    x = [0] * n_coef
    for i, col in enumerate(pivots):
        x[col] = rows[i][-1]
    return ("unique", tuple(x))


def solve_any(field: PrimeField, matrix: Sequence[Sequence[int]], rhs: Iterable[int]) -> tuple[int, ...] | None:
    """One particular solution of A x = b (free unknowns set to 0), or None
    when the system is inconsistent."""
    rows, n_coef = _as_rows(field, matrix, [[x] for x in rhs])
    if not rows:
        return None
    pivots = rref(field, rows, n_coef)
    for row in rows[len(pivots):]:
        if row[-1] % field.q:
            return None
    x = [0] * n_coef
    for i, col in enumerate(pivots):
        x[col] = rows[i][-1]
    return tuple(x)


def determined_unknowns(
    field: PrimeField,
    matrix: Sequence[Sequence[int]],
    rhs_rows: Sequence[Sequence[int]],
    wanted: Iterable[int],
) -> dict[int, tuple[int, ...]]:
    """Exact values of the ``wanted`` unknowns, for every RHS column at once.

    An unknown is determined when it takes the same value in every solution
    of the (possibly underdetermined) system: its column is a pivot whose row
    has zero entries in all free columns.  Unknowns that are not determined
    are simply absent from the result.  Raises InconsistentSystemError when
    the system has no solution at all.
    """
    rows, n_coef = _as_rows(field, matrix, rhs_rows)
    if not rows:
        return {}
    pivots = rref(field, rows, n_coef)
    q = field.q
    for row in rows[len(pivots):]:
        if any(x % q for x in row[n_coef:]):
            raise InconsistentSystemError("no solution")
    pivot_row = {col: i for i, col in enumerate(pivots)}
    free = [c for c in range(n_coef) if c not in pivot_row]
    out: dict[int, tuple[int, ...]] = {}
    for j in wanted:
        i = pivot_row.get(j)
        if i is None:
            continue
        if any(rows[i][f] % q for f in free):
            continue
        out[j] = tuple(rows[i][n_coef:])
    return out
