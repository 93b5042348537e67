"""Demand-private coded caching with multiple demands per user.

K real users each request L distinct files out of N.  The construction runs
the restricted-demand single-request scheme of :mod:`privcache.ucc` over
K * n_active virtual users, where n_active = min(N, K*L), and hides the
demand pattern behind four pieces of randomness:

* a uniform secret permutation of the file labels (only the server knows it;
  caches and broadcast are expressed in relabeled coordinates),
* per user, a secret uniform choice of L distinct virtual slots out of its
  n_active dedicated ones (handed to the user at placement time),
* a uniform "cover set" of n_active file labels containing every requested
  file, drawn at delivery time,
* per user, a uniform arrangement of the cover set into the user's demand
  block, pinned so that slot S[k][l] carries demand d[k][l].

The broadcast is the single-request scheme's message for the relabeled
expanded demand vector, which rides along in the clear; each user decodes
requested file l by running the virtual decoder of its secret slot, using
only the broadcast and its own cache.

All randomness flows from one seed through named substreams (labels are
hashed into independent generators), so any run is replayable.
"""

from __future__ import annotations

import hashlib
import itertools
import random
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Iterator, Sequence

from . import ucc
from .exact import sample_permutation
from .gf import PrimeField
from .ucc import Broadcast, Library, RestrictedDemand, UccParams

Demands = tuple[tuple[int, ...], ...]


@dataclass(frozen=True)
class SchemeParams:
    """Problem dimensions plus the placement knob r and field/packet choices."""

    n_files: int
    n_users: int
    demands_per_user: int
    r: int
    q: int = 257
    packet_size: int = 1

    def __post_init__(self):
        if self.n_files < 1 or self.n_users < 1:
            raise ValueError("need at least one file and one user")
        if not 1 <= self.demands_per_user <= self.n_files:
            raise ValueError("demands per user must lie in [1, n_files]")
        if not 0 <= self.r <= self.n_virtual:
            raise ValueError(f"r={self.r} outside [0, {self.n_virtual}]")
        if self.packet_size < 1:
            raise ValueError("packet_size must be positive")
        PrimeField(self.q)  # raises on a composite modulus

    @property
    def n_active(self) -> int:
        """Distinct file labels involved in one delivery round: min(N, K*L)."""
        return min(self.n_files, self.n_users * self.demands_per_user)

    @property
    def n_virtual(self) -> int:
        return self.n_users * self.n_active

    @property
    def field(self) -> PrimeField:
        return PrimeField(self.q)

    @property
    def ucc(self) -> UccParams:
        return UccParams(
            n_files=self.n_files,
            n_users=self.n_virtual,
            block_len=self.n_active,
            r=self.r,
            packet_size=self.packet_size,
        )

    @property
    def file_len(self) -> int:
        return self.ucc.file_len


@dataclass(frozen=True)
class Variant:
    """Which randomization stages are active.  The genuine scheme enables all
    four; switching stages off produces the derandomized baselines used by the
    privacy audits (a fully stripped variant is the plain non-private scheme)."""

    relabel_files: bool = True
    random_slots: bool = True
    random_cover: bool = True
    random_fill: bool = True


FULL = Variant()
NO_RELABEL = Variant(relabel_files=False)
PLAIN_BASELINE = Variant(False, False, False, False)


class SeedStreams:
    """Named, independent RNG substreams derived from one 64-bit seed."""

    def __init__(self, seed: int, prefix: str = ""):
        self.seed = seed
        self.prefix = prefix

    def rng(self, label: str) -> random.Random:
        digest = hashlib.sha256(f"{self.seed}/{self.prefix}{label}".encode()).digest()
        return random.Random(int.from_bytes(digest[:8], "big"))


# ---------------------------------------------------------------------------
# Demand matrices
# ---------------------------------------------------------------------------


def validate_demands(params: SchemeParams, rows: Iterable[Iterable[int]]) -> Demands:
    """Normalize and validate a demand matrix: K rows of L pairwise-distinct files."""
    mat = tuple(tuple(row) for row in rows)
    if len(mat) != params.n_users:
        raise ValueError(f"expected {params.n_users} demand rows, got {len(mat)}")
    for k, row in enumerate(mat):
        if len(row) != params.demands_per_user:
            raise ValueError(f"row {k} has {len(row)} entries, expected {params.demands_per_user}")
        if any(not 0 <= d < params.n_files for d in row):
            raise ValueError(f"row {k} has an out-of-range file index")
        if len(set(row)) != len(row):
            raise ValueError(f"row {k} repeats a file")
    return mat


def all_demand_rows(params: SchemeParams) -> list[tuple[int, ...]]:
    return list(itertools.permutations(range(params.n_files), params.demands_per_user))


def all_demand_matrices(params: SchemeParams) -> Iterator[Demands]:
    rows = all_demand_rows(params)
    return itertools.product(rows, repeat=params.n_users)


def sample_demands(params: SchemeParams, rng: random.Random) -> Demands:
    return tuple(
        tuple(rng.sample(range(params.n_files), params.demands_per_user))
        for _ in range(params.n_users)
    )


def requested_files(demands: Demands) -> tuple[int, ...]:
    return tuple(sorted({d for row in demands for d in row}))


def feasible_cover_sets(params: SchemeParams, demands: Demands) -> list[tuple[int, ...]]:
    """All n_active-subsets of the file labels containing every requested file,
    in lexicographic order."""
    need = set(requested_files(demands))
    return [
        cand
        for cand in itertools.combinations(range(params.n_files), params.n_active)
        if need.issubset(cand)
    ]


# ---------------------------------------------------------------------------
# Placement
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PlacementRandomness:
    """Server-side placement draws: the file-label permutation (real label n
    becomes broadcast label relabeling[n]) and each user's secret slot tuple."""

    relabeling: tuple[int, ...]
    slots: tuple[tuple[int, ...], ...]


def slot_support(params: SchemeParams) -> list[tuple[int, ...]]:
    """Every admissible slot tuple: ordered L-arrangements of [n_active)."""
    return list(itertools.permutations(range(params.n_active), params.demands_per_user))


def validate_placement(params: SchemeParams, rand: PlacementRandomness):
    if sorted(rand.relabeling) != list(range(params.n_files)):
        raise ValueError("relabeling is not a permutation of the file labels")
    if len(rand.slots) != params.n_users:
        raise ValueError("need one slot tuple per user")
    for k, sel in enumerate(rand.slots):
        if len(sel) != params.demands_per_user or len(set(sel)) != len(sel):
            raise ValueError(f"slot tuple {k} is not {params.demands_per_user} distinct slots")
        if any(not 0 <= s < params.n_active for s in sel):
            raise ValueError(f"slot tuple {k} out of range [0, {params.n_active})")


def sample_placement_randomness(params: SchemeParams, streams: SeedStreams, variant: Variant = FULL) -> PlacementRandomness:
    if variant.relabel_files:
        relabeling = sample_permutation(range(params.n_files), streams.rng("relabel"))
    else:
        relabeling = tuple(range(params.n_files))
    if variant.random_slots:
        rng = streams.rng("slots")
        slots = tuple(
            tuple(rng.sample(range(params.n_active), params.demands_per_user))
            for _ in range(params.n_users)
        )
    else:
        slots = tuple(tuple(range(params.demands_per_user)) for _ in range(params.n_users))
    return PlacementRandomness(relabeling, slots)


@dataclass
class UserCache:
    """What user k physically holds: its secret slot tuple and, per broadcast
    file label, the stored symbol positions of that (relabeled) file."""

    user: int
    selector: tuple[int, ...]
    slots_by_label: dict[int, dict[int, int]]

    @property
    def symbol_count(self) -> int:
        return sum(len(v) for v in self.slots_by_label.values())


def _virtual_user(params: SchemeParams, k: int, slot_value: int) -> int:
    return k * params.n_active + slot_value


def place_caches(params: SchemeParams, library: Library, rand: PlacementRandomness) -> list[UserCache]:
    """Fill every user's cache: user k stores, for each file n, the union of
    the symbols its L chosen virtual users would store, filed under the
    relabeled label.  Placement is uncoded: stored symbols are verbatim
    library symbols at their declared positions."""
    validate_placement(params, rand)
    if library.n_files != params.n_files or library.file_len != params.file_len:
        raise ValueError("library dimensions do not match params")
    caches = []
    for k in range(params.n_users):
        merged_positions = sorted(_stored_positions(params, k, rand.slots[k]))
        slots_by_label = {}
        for n in range(params.n_files):
            slots_by_label[rand.relabeling[n]] = {i: library.rows[n][i] for i in merged_positions}
        caches.append(UserCache(k, rand.slots[k], slots_by_label))
    return caches


def _stored_positions(params: SchemeParams, k: int, selector: Sequence[int]) -> set[int]:
    out: set[int] = set()
    for s in selector:
        out.update(ucc.user_positions(params.ucc, _virtual_user(params, k, s)))
    return out


def cache_size(params: SchemeParams, rand: PlacementRandomness | None = None, worst_case: bool = False) -> Fraction:
    """Normalized cache size: stored symbols per file times n_files, over file_len.

    With ``rand`` given, measures that realization (max over users); with
    ``worst_case`` it maximizes over every admissible slot tuple.  For the
    subset-indexed placement the two agree for every realization.
    """
    if worst_case:
        per_file = max(len(_stored_positions(params, 0, sel)) for sel in slot_support(params))
    elif rand is not None:
        validate_placement(params, rand)
        per_file = max(len(_stored_positions(params, k, rand.slots[k])) for k in range(params.n_users))
    else:
        raise ValueError("pass a placement realization or worst_case=True")
    return Fraction(per_file * params.n_files, params.file_len)


# ---------------------------------------------------------------------------
# Delivery
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DeliveryRecord:
    """Server-side delivery draws: the cover set, the expanded demand vector
    (pre-relabeling) and its broadcast-side image (post-relabeling)."""

    cover_set: tuple[int, ...]
    expanded: tuple[int, ...]
    masked: tuple[int, ...]


def block_support(params: SchemeParams, cover_set: Sequence[int], row: Sequence[int], selector: Sequence[int]) -> list[tuple[int, ...]]:
    """Every admissible demand block for one user: arrangements of the cover
    set with the user's demands pinned at its slots.  Size (n_active - L)!."""
    block_base = [-1] * params.n_active
    for s, d in zip(selector, row):
        block_base[s] = d
    rest_positions = [i for i in range(params.n_active) if block_base[i] < 0]
    rest_values = sorted(set(cover_set) - set(row))
    out = []
    for perm in itertools.permutations(rest_values):
        block = list(block_base)
        for pos, val in zip(rest_positions, perm):
            block[pos] = val
        out.append(tuple(block))
    return out


def fill_block(params: SchemeParams, cover_set: Sequence[int], row: Sequence[int], selector: Sequence[int],
               rng: random.Random | None = None) -> tuple[int, ...]:
    """One demand block: the user's demands pinned at its slots, remaining
    cover-set files placed in the free positions (shuffled when rng is given,
    ascending otherwise)."""
    block = [-1] * params.n_active
    for s, d in zip(selector, row):
        block[s] = d
    rest_values = sorted(set(cover_set) - set(row))
    if rng is not None:
        rng.shuffle(rest_values)
    it = iter(rest_values)
    for i in range(params.n_active):
        if block[i] < 0:
            block[i] = next(it)
    return tuple(block)


def sample_delivery(params: SchemeParams, demands: Demands, rand: PlacementRandomness,
                    streams: SeedStreams, variant: Variant = FULL) -> DeliveryRecord:
    """Draw the delivery randomness: cover set uniform over the feasible family,
    then each user's block uniform over its pinned arrangements, independently."""
    demands = validate_demands(params, demands)
    validate_placement(params, rand)
    covers = feasible_cover_sets(params, demands)
    if variant.random_cover:
        cover = covers[streams.rng("cover").randrange(len(covers))]
    else:
        cover = covers[0]
    blocks = []
    for k in range(params.n_users):
        rng = streams.rng(f"block:{k}") if variant.random_fill else None
        blocks.append(fill_block(params, cover, demands[k], rand.slots[k], rng))
    expanded = tuple(v for block in blocks for v in block)
    masked = tuple(rand.relabeling[v] for v in expanded)
    return DeliveryRecord(cover_set=cover, expanded=expanded, masked=masked)


@dataclass(frozen=True)
class PrivateBroadcast:
    """What goes over the shared link: the coded segments plus the masked
    expanded demand vector (carried verbatim; excluded from the rate)."""

    inner: Broadcast

    @property
    def masked_demand(self) -> tuple[int, ...]:
        return self.inner.demand.entries

    @property
    def segment_count(self) -> int:
        return self.inner.segment_count

    @property
    def symbol_count(self) -> int:
        return self.inner.symbol_count


def relabeled_library(params: SchemeParams, library: Library, rand: PlacementRandomness) -> Library:
    rows: list[tuple[int, ...]] = [()] * params.n_files
    for n in range(params.n_files):
        rows[rand.relabeling[n]] = library.rows[n]
    return Library(library.field, tuple(rows))


def deliver(params: SchemeParams, library: Library, demands: Demands, rand: PlacementRandomness,
            record: DeliveryRecord | None = None, streams: SeedStreams | None = None,
            variant: Variant = FULL) -> tuple[PrivateBroadcast, DeliveryRecord]:
    """Produce the broadcast for a demand matrix.

    The message equals the single-request scheme's broadcast over the
    relabeled library under the masked expanded demand, which is always a
    restricted demand (every block is an arrangement of the relabeled cover
    set)."""
    validate_demands(params, demands)
    validate_placement(params, rand)
    if record is None:
        if streams is None:
            raise ValueError("pass a DeliveryRecord or SeedStreams to draw one")
        record = sample_delivery(params, demands, rand, streams, variant)
    demand = RestrictedDemand(entries=record.masked, block_len=params.n_active)
    broadcast = ucc.encode(params.ucc, demand, relabeled_library(params, library, rand))
    return PrivateBroadcast(broadcast), record


def measured_rate(params: SchemeParams, broadcast: PrivateBroadcast) -> Fraction:
    return Fraction(broadcast.symbol_count, params.file_len)


# ---------------------------------------------------------------------------
# Decoding
# ---------------------------------------------------------------------------


def decode_user(params: SchemeParams, k: int, slot: int, broadcast: PrivateBroadcast,
                cache: UserCache, method: str = "linear") -> tuple[int, ...]:
    """Recover user k's slot-th requested file from the broadcast and its own
    cache only.  The user reads the masked demand off the broadcast, picks the
    cache entries its chosen virtual user would hold for the active labels,
    and runs the single-request decoder for that virtual user."""
    if not 0 <= slot < params.demands_per_user:
        raise ValueError(f"slot {slot} out of range")
    u = _virtual_user(params, k, cache.selector[slot])
    masked = broadcast.masked_demand
    positions = ucc.user_positions(params.ucc, u)
    try:
        cache_slice = {
            label: {i: cache.slots_by_label[label][i] for i in positions}
            for label in set(masked[:params.n_active])
        }
    except KeyError as exc:
        raise ucc.DecodeError(f"cache is missing label/position {exc}") from None
    return ucc.decode(params.ucc, u, broadcast.inner, cache_slice, method=method)


# ---------------------------------------------------------------------------
# End-to-end simulation
# ---------------------------------------------------------------------------


@dataclass
class DecodeVerdict:
    user: int
    slot: int
    file_index: int
    ok: bool


@dataclass
class SimulationTrace:
    """Everything one seeded run produced, replayable and JSON-serializable."""

    seed: int
    params: SchemeParams
    demands: Demands
    randomness: PlacementRandomness
    record: DeliveryRecord
    broadcast: PrivateBroadcast
    memory: Fraction
    rate: Fraction
    verdicts: list[DecodeVerdict]

    @property
    def correct_all(self) -> bool:
        return all(v.ok for v in self.verdicts)

    def to_json_dict(self) -> dict:
        par = self.params
        return {
            "seed": self.seed,
            "params": {
                "n_files": par.n_files,
                "n_users": par.n_users,
                "demands_per_user": par.demands_per_user,
                "r": par.r,
                "q": par.q,
                "packet_size": par.packet_size,
                "n_active": par.n_active,
                "n_virtual": par.n_virtual,
                "file_len": par.file_len,
            },
            "demands": [list(row) for row in self.demands],
            "relabeling": list(self.randomness.relabeling),
            "slots": [list(s) for s in self.randomness.slots],
            "cover_set": list(self.record.cover_set),
            "expanded_demand": list(self.record.expanded),
            "masked_demand": list(self.record.masked),
            "memory": [self.memory.numerator, self.memory.denominator],
            "rate": [self.rate.numerator, self.rate.denominator],
            "segment_count": self.broadcast.segment_count,
            "broadcast": self.broadcast.inner.trace_record(),
            "decodes": [
                {"user": v.user, "slot": v.slot, "file": v.file_index, "ok": v.ok}
                for v in self.verdicts
            ],
            "correct_all": self.correct_all,
        }

    def summary_row(self) -> dict:
        par = self.params
        return {
            "N": par.n_files,
            "K": par.n_users,
            "L": par.demands_per_user,
            "r": par.r,
            "M_num": self.memory.numerator,
            "M_den": self.memory.denominator,
            "R_num": self.rate.numerator,
            "R_den": self.rate.denominator,
            "correct_all": self.correct_all,
        }


def run_simulation(params: SchemeParams, seed: int, demands: Demands | None = None,
                   library: Library | None = None, decoder: str = "linear",
                   variant: Variant = FULL) -> SimulationTrace:
    """One full placement + delivery + decode-everything run from a single seed."""
    streams = SeedStreams(seed)
    if demands is None:
        demands = sample_demands(params, streams.rng("demands"))
    else:
        demands = validate_demands(params, demands)
    if library is None:
        library = Library.random(params.field, params.n_files, params.file_len, streams.rng("library"))
    rand = sample_placement_randomness(params, streams, variant)
    caches = place_caches(params, library, rand)
    broadcast, record = deliver(params, library, demands, rand, streams=streams, variant=variant)
    verdicts = []
    for k in range(params.n_users):
        for l in range(params.demands_per_user):
            want = library.rows[demands[k][l]]
            try:
                got = decode_user(params, k, l, broadcast, caches[k], method=decoder)
                ok = got == tuple(want)
            except ucc.DecodeError:
                ok = False
            verdicts.append(DecodeVerdict(k, l, demands[k][l], ok))
    memory = Fraction(max(c.symbol_count for c in caches), params.file_len)
    return SimulationTrace(
        seed=seed,
        params=params,
        demands=demands,
        randomness=rand,
        record=record,
        broadcast=broadcast,
        memory=memory,
        rate=measured_rate(params, broadcast),
        verdicts=verdicts,
    )
