"""Single-demand coded caching with uncoded placement and restricted demands.

This is the engine underneath the private scheme: N files, K_v users, each
requesting one file, where demand vectors are restricted to split into equal
blocks that are each a permutation of one common file subset.  Placement is
the classic subset-indexed layout (each file splits into C(K_v, r) subfiles
labeled by r-subsets of users; user u stores every subfile whose label
contains u) and delivery is the leader-based scheme of Yu, Maddah-Ali and
Avestimehr: one coded segment per (r+1)-subset of users that intersects the
leader set, each segment the field sum of the subfiles "wanted by u, labeled
by the rest of the subset".  Because block 0 of a restricted demand names
every distinct requested file exactly once, the leader set is fixed to the
first block's positions.

Two decoders are provided:

* ``decode_linear`` is the reference decoder.  It treats every uncached
  subfile of the requested files as an unknown, every transmitted segment as
  a linear equation, and reads the requested file out of the exact solution.
  Correctness is the contract; nothing scheme-specific is assumed.
* ``decode_structural`` is the optimized path: it reconstructs untransmitted
  all-non-leader segments (closed-form leader-substitution identity in the
  plain convention, a data-independent formal combination in the signed one)
  and then peels segment equations with a single unknown subfile.  It never
  eliminates over the symbol data and is cross-checked against the reference
  decoder in the test suite.
"""

from __future__ import annotations

import itertools
import random
from dataclasses import dataclass
from typing import Iterable, Mapping

from .exact import binomial, subset_rank, subsets_of_size
from .gf import InconsistentSystemError, PrimeField, SymbolVector, determined_unknowns, solve_any


class DecodeError(RuntimeError):
    """The decoder could not pin down the requested file (bad inputs)."""


@dataclass(frozen=True)
class UccParams:
    """Dimensions of one restricted-demand instance.

    n_users is the total user count, block_len the demand block length (one
    block per user group; the number of groups is n_users // block_len), and
    r the placement parameter: each file splits into C(n_users, r) subfiles
    of packet_size symbols, so file_len = C(n_users, r) * packet_size.
    """

    n_files: int
    n_users: int
    block_len: int
    r: int
    packet_size: int = 1

    def __post_init__(self):
        if self.n_files < 1:
            raise ValueError("need at least one file")
        if self.n_users < 1:
            raise ValueError("need at least one user")
        if not 1 <= self.block_len <= self.n_files:
            raise ValueError("block length must lie in [1, n_files]")
        if self.n_users % self.block_len:
            raise ValueError("n_users must be a multiple of block_len")
        if not 0 <= self.r <= self.n_users:
            raise ValueError(f"r={self.r} outside [0, {self.n_users}]")
        if self.packet_size < 1:
            raise ValueError("packet_size must be positive")

    @property
    def subfile_count(self) -> int:
        return binomial(self.n_users, self.r)

    @property
    def file_len(self) -> int:
        return self.subfile_count * self.packet_size

    @property
    def leaders(self) -> tuple[int, ...]:
        return tuple(range(self.block_len))

    @property
    def n_groups(self) -> int:
        return self.n_users // self.block_len

    @classmethod
    def for_file_len(cls, n_files: int, n_users: int, block_len: int, r: int, file_len: int) -> "UccParams":
        """Build params from a total file length, which must be a multiple of C(n_users, r)."""
        blocks = binomial(n_users, r)
        if file_len <= 0 or file_len % blocks:
            raise ValueError(f"file length {file_len} is not a positive multiple of C({n_users},{r})={blocks}")
        return cls(n_files, n_users, block_len, r, file_len // blocks)


def subfile_labels(params: UccParams) -> list[tuple[int, ...]]:
    """All r-subsets of users in lexicographic order; list index equals rank."""
    return list(subsets_of_size(range(params.n_users), params.r))


def user_label_ranks(params: UccParams, u: int) -> list[int]:
    """Ranks of the subfile labels stored by user u (those containing u)."""
    return [t for t, lab in enumerate(subfile_labels(params)) if u in lab]


def user_positions(params: UccParams, u: int) -> list[int]:
    """Symbol indices (within any one file) stored by user u."""
    p = params.packet_size
    out: list[int] = []
    for t in user_label_ranks(params, u):
        out.extend(range(t * p, (t + 1) * p))
    return out


@dataclass(frozen=True)
class Library:
    """N files of file_len symbols each, over one prime field."""

    field: PrimeField
    rows: tuple[tuple[int, ...], ...]

    def __post_init__(self):
        if not self.rows:
            raise ValueError("empty library")
        width = len(self.rows[0])
        q = self.field.q
        for row in self.rows:
            if len(row) != width:
                raise ValueError("ragged library")
            if any(not (0 <= s < q) for s in row):
                raise ValueError("library symbol outside [0, q)")

    @property
    def n_files(self) -> int:
        return len(self.rows)

    @property
    def file_len(self) -> int:
        return len(self.rows[0])

    @classmethod
    def random(cls, field: PrimeField, n_files: int, file_len: int, rng: random.Random) -> "Library":
        return cls(field, tuple(tuple(rng.randrange(field.q) for _ in range(file_len)) for _ in range(n_files)))

    @classmethod
    def ramp(cls, field: PrimeField, n_files: int, file_len: int) -> "Library":
        """Deterministic library; symbols are pairwise distinct when q > n_files * file_len."""
        q = field.q
        return cls(field, tuple(tuple((n * file_len + i + 1) % q for i in range(file_len)) for n in range(n_files)))


# ---------------------------------------------------------------------------
# Restricted demands
# ---------------------------------------------------------------------------


def is_restricted(entries: Iterable[int], block_len: int) -> bool:
    """True iff the vector splits into blocks of block_len entries, each a
    permutation of one common block_len-subset of files."""
    vec = tuple(entries)
    if block_len < 1 or not vec or len(vec) % block_len:
        raise ValueError(f"demand length {len(vec)} is not a positive multiple of block {block_len}")
    base = set(vec[:block_len])
    if len(base) != block_len:
        return False
    for i in range(0, len(vec), block_len):
        if set(vec[i:i + block_len]) != base:
            return False
    return True


@dataclass(frozen=True)
class RestrictedDemand:
    """A validated restricted demand vector."""

    entries: tuple[int, ...]
    block_len: int

    def __post_init__(self):
        if not is_restricted(self.entries, self.block_len):
            raise ValueError(f"{self.entries} is not a restricted demand for block length {self.block_len}")

    @property
    def file_set(self) -> frozenset[int]:
        return frozenset(self.entries[:self.block_len])

    @property
    def blocks(self) -> tuple[tuple[int, ...], ...]:
        b = self.block_len
        return tuple(self.entries[i:i + b] for i in range(0, len(self.entries), b))


# ---------------------------------------------------------------------------
# Delivery
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Broadcast:
    """One delivery: coded segments keyed by their (r+1)-subset, plus the
    demand vector carried in the clear (its size is not counted in the rate).

    ``signed`` records the coefficient convention: False means every subfile
    enters its segment with coefficient +1; True means the subfile of the
    i-th smallest user in the subset enters with (-1)^i.
    """

    params: UccParams
    demand: RestrictedDemand
    segments: dict[tuple[int, ...], SymbolVector]
    signed: bool = False

    @property
    def segment_count(self) -> int:
        return len(self.segments)

    @property
    def symbol_count(self) -> int:
        return sum(len(v) for v in self.segments.values())

    def trace_record(self) -> dict:
        par = self.params
        return {
            "params": {
                "n_files": par.n_files,
                "n_users": par.n_users,
                "block_len": par.block_len,
                "r": par.r,
                "packet_size": par.packet_size,
                "file_len": par.file_len,
            },
            "demand": list(self.demand.entries),
            "leaders": list(par.leaders),
            "signed": self.signed,
            "segments": [
                {
                    "users": list(sub),
                    "rank": subset_rank(range(par.n_users), sub),
                    "symbols": list(vec.entries),
                }
                for sub, vec in sorted(self.segments.items())
            ],
        }


def _validate_demand(params: UccParams, demand: RestrictedDemand):
    if demand.block_len != params.block_len:
        raise ValueError("demand block length does not match params")
    if len(demand.entries) != params.n_users:
        raise ValueError(f"demand length {len(demand.entries)} != n_users {params.n_users}")
    if any(not 0 <= d < params.n_files for d in demand.entries):
        raise ValueError("demand entry outside file range")


def segment_signs(signed: bool, size: int) -> list[int]:
    """Per-position coefficients of one segment: all +1, or alternating."""
    if not signed:
        return [1] * size
    return [1 if i % 2 == 0 else -1 for i in range(size)]


def use_signed_segments(params: UccParams, field: PrimeField) -> bool:
    """Coefficient convention for this instance.

    With one or two user groups the plain +1 convention is lossless (every
    untransmitted segment is an alternating sum of transmitted ones), and over
    GF(2) signs are invisible.  With three or more groups over an odd-
    characteristic field the +1 convention provably loses information for
    demand vectors that repeat a file across non-leader blocks, so the
    alternating convention is used there.
    """
    return params.n_groups >= 3 and field.q != 2


def encode(params: UccParams, demand: RestrictedDemand, library: Library,
           signed: bool | None = None) -> Broadcast:
    """Broadcast for a restricted demand: one segment per (r+1)-subset that
    intersects the leader set, each the field sum over its users u of the
    subfile of demand[u] labeled by the remaining users.

    ``signed=None`` picks the coefficient convention via use_signed_segments.
    """
    _validate_demand(params, demand)
    if library.n_files != params.n_files or library.file_len != params.file_len:
        raise ValueError("library dimensions do not match params")
    if signed is None:
        signed = use_signed_segments(params, library.field)
    q = library.field.q
    packet = params.packet_size
    rank_of = {lab: t for t, lab in enumerate(subfile_labels(params))}
    coeffs = segment_signs(signed, params.r + 1)
    segments: dict[tuple[int, ...], SymbolVector] = {}
    for sub in subsets_of_size(range(params.n_users), params.r + 1):
        if sub[0] >= params.block_len:
            continue  # subsets are sorted, so sub[0] < block_len iff a leader is present
        acc = [0] * packet
        for c, u in zip(coeffs, sub):
            lab = tuple(v for v in sub if v != u)
            base = rank_of[lab] * packet
            row = library.rows[demand.entries[u]]
            for p in range(packet):
                acc[p] = (acc[p] + c * row[base + p]) % q
        segments[sub] = SymbolVector(library.field, tuple(acc))
    expected = binomial(params.n_users, params.r + 1) - binomial(params.n_users - params.block_len, params.r + 1)
    if len(segments) != expected:
        raise RuntimeError(f"segment count {len(segments)} != {expected}")
    return Broadcast(params=params, demand=demand, segments=segments, signed=signed)


# ---------------------------------------------------------------------------
# Decoding
# ---------------------------------------------------------------------------

CacheSlice = Mapping[int, Mapping[int, int]]  # file -> {symbol index -> symbol}


def cache_slice_for(params: UccParams, u: int, library: Library, files: Iterable[int]) -> dict[int, dict[int, int]]:
    """The symbols of the given files that user u stores, straight from the library."""
    pos = user_positions(params, u)
    return {n: {i: library.rows[n][i] for i in pos} for n in set(files)}


def _assemble(params: UccParams, target: int, u: int, cache_slice: CacheSlice,
              solved: dict[int, tuple[int, ...]], var: dict, labels: list) -> tuple[int, ...]:
    packet = params.packet_size
    out = [0] * params.file_len
    for t, lab in enumerate(labels):
        base = t * packet
        if u in lab:
            stored = cache_slice[target]
            for p in range(packet):
                out[base + p] = stored[base + p]
        else:
            vals = solved[var[(target, t)]]
            for p in range(packet):
                out[base + p] = vals[p]
    return tuple(out)


def _segment_field(broadcast: Broadcast) -> PrimeField:
    if broadcast.segments:
        return next(iter(broadcast.segments.values())).field
    raise DecodeError("broadcast carries no segments and no field")


def decode_linear(params: UccParams, u: int, broadcast: Broadcast, cache_slice: CacheSlice) -> tuple[int, ...]:
    """Reference decoder: exact elimination over the transmitted segments.

    Unknowns are the subfiles of the demanded files not cached by u; cached
    subfiles move to the right-hand side.  All packet positions share one
    coefficient matrix and are solved together.
    """
    demand = broadcast.demand
    if not 0 <= u < params.n_users:
        raise ValueError(f"user {u} out of range")
    target = demand.entries[u]
    labels = subfile_labels(params)
    rank_of = {lab: t for t, lab in enumerate(labels)}
    packet = params.packet_size
    uncached = [t for t, lab in enumerate(labels) if u not in lab]
    try:
        if not uncached:
            # r = n_users: the whole file is already cached
            return _assemble(params, target, u, cache_slice, {}, {}, labels)
        fld = _segment_field(broadcast)
        q = fld.q

        var: dict[tuple[int, int], int] = {}
        for n in sorted(demand.file_set):
            for t in uncached:
                var[(n, t)] = len(var)

        coeffs = segment_signs(broadcast.signed, params.r + 1)
        matrix: list[list[int]] = []
        rhs_rows: list[list[int]] = []
        for sub, seg in sorted(broadcast.segments.items()):
            coef = [0] * len(var)
            rhs = list(seg.entries)
            for c, v in zip(coeffs, sub):
                n_v = demand.entries[v]
                lab = tuple(x for x in sub if x != v)
                t = rank_of[lab]
                if u in lab:
                    stored = cache_slice[n_v]
                    base = t * packet
                    for p in range(packet):
                        rhs[p] = (rhs[p] - c * stored[base + p]) % q
                else:
                    j = var[(n_v, t)]
                    coef[j] = (coef[j] + c) % q
            matrix.append(coef)
            rhs_rows.append(rhs)

        wanted = [var[(target, t)] for t in uncached]
        solved = determined_unknowns(fld, matrix, rhs_rows, wanted)
        if len(solved) < len(wanted):
            raise DecodeError(f"user {u}: {len(wanted) - len(solved)} subfiles undetermined")
        return _assemble(params, target, u, cache_slice, solved, var, labels)
    except InconsistentSystemError as exc:
        raise DecodeError(f"inconsistent broadcast: {exc}") from None
    except KeyError as exc:
        raise DecodeError(f"cache slice is missing symbols: {exc}") from None


def _formal_segment(params: UccParams, demand: tuple[int, ...], sub: tuple[int, ...],
                    rank_of: dict, basis: dict, coeffs: list[int], q: int) -> list[int]:
    row = [0] * len(basis)
    for c, v in zip(coeffs, sub):
        b = basis[(demand[v], rank_of[tuple(x for x in sub if x != v)])]
        row[b] = (row[b] + c) % q
    return row


def _reconstructed_segments_signed(params: UccParams, broadcast: Broadcast, q: int) -> list[tuple[tuple[int, ...], list[int]]]:
    """Signed-mode reconstruction: express each untransmitted segment as an
    exact combination of transmitted ones by solving a small formal system
    over the (file, subfile-label) basis.  The combination depends only on the
    demand pattern, never on library data or any cache."""
    demand = broadcast.demand.entries
    fld = _segment_field(broadcast)
    labels = subfile_labels(params)
    rank_of = {lab: t for t, lab in enumerate(labels)}
    basis = {}
    for n in sorted(broadcast.demand.file_set):
        for t in range(len(labels)):
            basis[(n, t)] = len(basis)
    coeffs = segment_signs(True, params.r + 1)
    tx_subs = sorted(broadcast.segments)
    tx_rows = [_formal_segment(params, demand, s, rank_of, basis, coeffs, q) for s in tx_subs]
    # columns of the formal system are the transmitted segments
    a = [[tx_rows[j][b] for j in range(len(tx_subs))] for b in range(len(basis))]
    packet = params.packet_size
    out = []
    for sub in subsets_of_size(range(params.block_len, params.n_users), params.r + 1):
        target = _formal_segment(params, demand, sub, rank_of, basis, coeffs, q)
        combo = solve_any(fld, a, target)
        if combo is None:
            continue
        vals = [0] * packet
        for x, s in zip(combo, tx_subs):
            if x:
                seg = broadcast.segments[s]
                for p in range(packet):
                    vals[p] = (vals[p] + x * seg.entries[p]) % q
        out.append((sub, vals))
    return out


def _reconstructed_segments(params: UccParams, broadcast: Broadcast, q: int) -> list[tuple[tuple[int, ...], list[int]]]:
    """Untransmitted segments (no leader in the subset) rebuilt from transmitted
    ones via the alternating identity, where the subset's demands are distinct.

    For such a subset B, replacing any nonempty V of its users by the leaders
    of their files gives a transmitted segment, and the signed sum over all V
    telescopes to the missing segment: pairing (V, u in B\\V) with
    (V + {u}, leader of u's file) cancels every subfile term.  The identity is
    specific to the +1 coefficient convention; alternating-sign broadcasts use
    the formal-combination route instead.
    """
    if broadcast.signed:
        return _reconstructed_segments_signed(params, broadcast, q)
    demand = broadcast.demand.entries
    leader_of: dict[int, int] = {}
    for i in range(params.block_len):
        leader_of.setdefault(demand[i], i)
    packet = params.packet_size
    out = []
    non_leaders = range(params.block_len, params.n_users)
    for sub in subsets_of_size(non_leaders, params.r + 1):
        files = [demand[v] for v in sub]
        if len(set(files)) != len(files):
            continue  # repeated file: identity unavailable, leave to peeling
        acc = [0] * packet
        for size in range(1, len(sub) + 1):
            sign = 1 if size % 2 else -1
            for v_set in itertools.combinations(sub, size):
                repl = sorted((set(sub) - set(v_set)) | {leader_of[demand[v]] for v in v_set})
                seg = broadcast.segments[tuple(repl)]
                for p in range(packet):
                    acc[p] = (acc[p] + sign * seg.entries[p]) % q
        out.append((sub, acc))
    return out


def decode_structural(params: UccParams, u: int, broadcast: Broadcast, cache_slice: CacheSlice) -> tuple[int, ...]:
    """Peeling decoder: no elimination, only segment identities.

    Seeds the known set with u's cached subfiles of the demanded files, adds
    reconstructed all-non-leader segments, then repeatedly resolves any
    segment equation with exactly one unknown subfile.
    """
    demand = broadcast.demand
    if not 0 <= u < params.n_users:
        raise ValueError(f"user {u} out of range")
    target = demand.entries[u]
    labels = subfile_labels(params)
    rank_of = {lab: t for t, lab in enumerate(labels)}
    packet = params.packet_size
    uncached = [t for t, lab in enumerate(labels) if u not in lab]
    try:
        if not uncached:
            # r = n_users: everything requested is already in the cache
            return _assemble(params, target, u, cache_slice, {}, {}, labels)
    except KeyError as exc:
        raise DecodeError(f"cache slice is missing symbols: {exc}") from None
    q = _segment_field(broadcast).q

    known: dict[tuple[int, int], tuple[int, ...]] = {}
    try:
        for n in demand.file_set:
            stored = cache_slice[n]
            for t, lab in enumerate(labels):
                if u in lab:
                    base = t * packet
                    known[(n, t)] = tuple(stored[base + p] for p in range(packet))
    except KeyError as exc:
        raise DecodeError(f"cache slice is missing symbols: {exc}") from None

    equations = [(sub, list(seg.entries)) for sub, seg in sorted(broadcast.segments.items())]
    equations.extend(_reconstructed_segments(params, broadcast, q))

    coeffs = segment_signs(broadcast.signed, params.r + 1)
    pending = []
    for sub, vals in equations:
        terms = [
            (demand.entries[v], rank_of[tuple(x for x in sub if x != v)], c)
            for c, v in zip(coeffs, sub)
        ]
        pending.append((terms, vals))

    progress = True
    while progress:
        progress = False
        remaining = []
        for terms, vals in pending:
            missing = [t for t in terms if (t[0], t[1]) not in known]
            if not missing:
                continue
            if len(missing) == 1:
                n_m, t_m, c_m = missing[0]
                acc = list(vals)
                for n_t, t_t, c_t in terms:
                    if (n_t, t_t) != (n_m, t_m):
                        kv = known[(n_t, t_t)]
                        for p in range(packet):
                            acc[p] = (acc[p] - c_t * kv[p]) % q
                # c_m is +-1, hence its own inverse
                known[(n_m, t_m)] = tuple((c_m * a) % q for a in acc)
                progress = True
            else:
                remaining.append((terms, vals))
        pending = remaining

    var = {(target, t): (target, t) for t in uncached}
    missing = [t for t in uncached if (target, t) not in known]
    if missing:
        raise DecodeError(f"user {u}: peeling left {len(missing)} subfiles unknown")
    solved = {(target, t): known[(target, t)] for t in uncached}
    try:
        return _assemble(params, target, u, cache_slice, solved, var, labels)
    except KeyError as exc:
        raise DecodeError(f"cache slice is missing symbols: {exc}") from None


def decode(params: UccParams, u: int, broadcast: Broadcast, cache_slice: CacheSlice, method: str = "linear") -> tuple[int, ...]:
    """Decode user u's requested file; method is "linear" (reference) or "structural"."""
    if method == "linear":
        return decode_linear(params, u, broadcast, cache_slice)
    if method == "structural":
        return decode_structural(params, u, broadcast, cache_slice)
    raise ValueError(f"unknown decode method {method!r}")
