"""Exact privacy audits by enumeration.

Two independent routes certify that one user learns nothing about the other
users' demands:

* the sufficient-statistic route: the only demand-bearing part of a user's
  observation is the masked expanded demand vector.  ``masked_demand_law``
  computes its exact conditional law given the observer's demand row and slot
  tuple by enumerating every relabeling, cover set and block arrangement
  (non-observer slot tuples marginalized uniformly).  For the genuine scheme
  the law is uniform over all restricted demand vectors with mass
  (N - n_active)! / (N! * (n_active!)^(K-1)), independent of the demand
  matrix; equality is exact rational equality, no tolerance.
* the end-to-end route: on instances small enough to enumerate every library
  realization, ``exact_mutual_information`` builds the exact joint law of
  (other rows; broadcast, observer cache, observer row) and checks
  factorization.  Zero is certified by exact per-realization conditional-law
  equality (stronger than one-prior independence); a nonzero value, which the
  derandomized baseline variants exhibit, is reported in base-q units.

A chi-square smoke test covers instances too large for exact enumeration.
"""

from __future__ import annotations

import itertools
import math
import time
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterator, Mapping

from . import scheme as sch
from .exact import binomial, falling_factorial
from .scheme import (
    FULL,
    Demands,
    DeliveryRecord,
    PlacementRandomness,
    SchemeParams,
    SeedStreams,
    Variant,
)
from .ucc import Library


class BudgetExceededError(RuntimeError):
    """Requested enumeration is larger than the configured budget."""


def _check_budget(total: int, budget: int, description: str):
    if total > budget:
        raise BudgetExceededError(
            f"{description}: {total} enumeration atoms exceed the budget of {budget}"
        )


def factorial(n: int) -> int:
    return math.factorial(n)


def closed_form_mass(params: SchemeParams) -> Fraction:
    """Mass of each restricted vector under the masked-demand law:
    (N - n_active)! / (N! * (n_active!)^(K-1))."""
    n, a, k = params.n_files, params.n_active, params.n_users
    return Fraction(factorial(n - a), factorial(n) * factorial(a) ** (k - 1))


def restricted_vectors(params: SchemeParams) -> Iterator[tuple[int, ...]]:
    """All restricted demand vectors: pick the common n_active-subset, then an
    arrangement of it per user block.  Count: C(N, n_active) * (n_active!)^K."""
    for base in itertools.combinations(range(params.n_files), params.n_active):
        for blocks in itertools.product(itertools.permutations(base), repeat=params.n_users):
            yield tuple(v for block in blocks for v in block)


def restricted_vector_count(params: SchemeParams) -> int:
    return binomial(params.n_files, params.n_active) * factorial(params.n_active) ** params.n_users


# ---------------------------------------------------------------------------
# Exact law of the masked expanded demand
# ---------------------------------------------------------------------------


def _relabelings(params: SchemeParams, variant: Variant) -> list[tuple[int, ...]]:
    if variant.relabel_files:
        return list(itertools.permutations(range(params.n_files)))
    return [tuple(range(params.n_files))]


def _block_options(params: SchemeParams, cover: tuple[int, ...], row: tuple[int, ...],
                   selector: tuple[int, ...] | None, variant: Variant) -> list[tuple[tuple[int, ...], Fraction]]:
    """(block, probability) pairs for one user's block given the cover set.

    With a fixed selector (the observer) only the fill is random; otherwise
    the slot tuple is marginalized uniformly as well.
    """
    selectors: list[tuple[tuple[int, ...], Fraction]]
    if selector is not None:
        selectors = [(tuple(selector), Fraction(1))]
    elif variant.random_slots:
        sup = sch.slot_support(params)
        selectors = [(s, Fraction(1, len(sup))) for s in sup]
    else:
        selectors = [(tuple(range(params.demands_per_user)), Fraction(1))]
    out = []
    for sel, w_sel in selectors:
        if variant.random_fill:
            fills = sch.block_support(params, cover, row, sel)
            for b in fills:
                out.append((b, w_sel / len(fills)))
        else:
            out.append((sch.fill_block(params, cover, row, sel), w_sel))
    return out


def masked_demand_law(params: SchemeParams, demands: Demands, observer: int,
                      selector: tuple[int, ...], variant: Variant = FULL,
                      budget: int = 10 ** 7) -> dict[tuple[int, ...], Fraction]:
    """Exact law of the masked expanded demand given the demand matrix and the
    observer's slot tuple, by full enumeration."""
    demands = sch.validate_demands(params, demands)
    if not 0 <= observer < params.n_users:
        raise ValueError("observer out of range")
    if tuple(selector) not in set(sch.slot_support(params)):
        raise ValueError(f"selector {selector} is not {params.demands_per_user} distinct slots")
    relabelings = _relabelings(params, variant)
    covers = sch.feasible_cover_sets(params, demands)
    if variant.random_cover:
        cover_opts = [(c, Fraction(1, len(covers))) for c in covers]
    else:
        cover_opts = [(covers[0], Fraction(1))]

    fill = factorial(params.n_active - params.demands_per_user)
    per_block_other = (len(sch.slot_support(params)) if variant.random_slots else 1) * (fill if variant.random_fill else 1)
    per_cover = (fill if variant.random_fill else 1) * per_block_other ** (params.n_users - 1)
    _check_budget(len(relabelings) * len(cover_opts) * per_cover, budget,
                  "masked-demand law enumeration")

    law: dict[tuple[int, ...], Fraction] = {}
    for cover, w_cover in cover_opts:
        options = []
        for k in range(params.n_users):
            sel = selector if k == observer else None
            options.append(_block_options(params, cover, demands[k], sel, variant))
        for combo in itertools.product(*options):
            blocks = tuple(b for b, _ in combo)
            w_blocks = math.prod((w for _, w in combo), start=Fraction(1))
            expanded = tuple(v for block in blocks for v in block)
            for relab in relabelings:
                masked = tuple(relab[v] for v in expanded)
                w = w_cover * w_blocks / len(relabelings)
                law[masked] = law.get(masked, Fraction(0)) + w
    total = sum(law.values(), Fraction(0))
    if total != 1:
        raise RuntimeError(f"law mass {total} != 1")
    return law


@dataclass
class InvarianceReport:
    identical: bool
    max_discrepancy: Fraction
    laws_checked: int


def verify_law_invariance(params: SchemeParams, demand_list: list[Demands], observer: int,
                          selector: tuple[int, ...], variant: Variant = FULL,
                          budget: int = 10 ** 7) -> InvarianceReport:
    """Exact equality of the masked-demand law across demand matrices that agree
    on the observer's row (the distribution a curious user could ever see)."""
    mats = [sch.validate_demands(params, d) for d in demand_list]
    if not mats:
        raise ValueError("empty demand list")
    row = mats[0][observer]
    if any(m[observer] != row for m in mats):
        raise ValueError("demand matrices must agree on the observer's row")
    laws = [masked_demand_law(params, m, observer, selector, variant, budget) for m in mats]
    worst = Fraction(0)
    base = laws[0]
    for law in laws[1:]:
        for key in set(base) | set(law):
            gap = abs(base.get(key, Fraction(0)) - law.get(key, Fraction(0)))
            if gap > worst:
                worst = gap
    return InvarianceReport(identical=(worst == 0), max_discrepancy=worst, laws_checked=len(laws))


# ---------------------------------------------------------------------------
# Exact mutual information on fully enumerable instances
# ---------------------------------------------------------------------------


def _canonical_outcome(params: SchemeParams, broadcast, cache, observer_row: tuple[int, ...]) -> tuple:
    """Hashable encoding of what the observer sees: the broadcast (masked
    demand plus sorted segment table), its own cache (selector plus sorted
    slot contents in label order), and its own demand row."""
    x_part = (
        broadcast.masked_demand,
        tuple(sorted((sub, seg.entries) for sub, seg in broadcast.inner.segments.items())),
    )
    z_part = (
        cache.selector,
        tuple(tuple(sorted(cache.slots_by_label[label].items())) for label in range(params.n_files)),
    )
    return (x_part, z_part, observer_row)


def _joint_atom_count(params: SchemeParams, variant: Variant) -> tuple[int, dict[str, int]]:
    n, f, q = params.n_files, params.file_len, params.q
    if f * n * math.log(q) > math.log(10 ** 30):
        # the library space alone dwarfs any realistic budget
        return 10 ** 30, {"library_realizations": 10 ** 30}
    libraries = q ** (n * f)
    n_rows = falling_factorial(params.n_files, params.demands_per_user)
    n_mats = n_rows ** params.n_users
    relab = factorial(n) if variant.relabel_files else 1
    slots = (len(sch.slot_support(params)) if variant.random_slots else 1) ** params.n_users
    fill = (factorial(params.n_active - params.demands_per_user) if variant.random_fill else 1) ** params.n_users
    max_covers = binomial(n - params.demands_per_user, params.n_active - params.demands_per_user) if variant.random_cover else 1
    max_covers = max(max_covers, 1)
    cards = {
        "library_realizations": libraries,
        "demand_matrices": n_mats,
        "relabelings": relab,
        "slot_assignments": slots,
        "cover_sets_max": max_covers,
        "block_fills": fill,
    }
    return libraries * n_mats * relab * slots * max_covers * fill, cards


def _enumerate_joint(params: SchemeParams, observer: int, variant: Variant):
    """Yield (demands, slots, masked, outcome, p_given_demands) over the whole
    randomness and library space.  p_given_demands is the exact conditional
    probability of the atom given the demand matrix."""
    q, n, f = params.q, params.n_files, params.file_len
    relabelings = _relabelings(params, variant)
    slot_opts = sch.slot_support(params) if variant.random_slots else [tuple(range(params.demands_per_user))]
    p_lib = Fraction(1, q ** (n * f))
    fld = params.field
    mats = list(sch.all_demand_matrices(params))
    for flat in itertools.product(range(q), repeat=n * f):
        library = Library(fld, tuple(flat[i * f:(i + 1) * f] for i in range(n)))
        for relab in relabelings:
            for slots in itertools.product(slot_opts, repeat=params.n_users):
                rand = PlacementRandomness(tuple(relab), tuple(slots))
                caches = sch.place_caches(params, library, rand)
                cache = caches[observer]
                p_place = p_lib / (len(relabelings) * len(slot_opts) ** params.n_users)
                for demands in mats:
                    covers = sch.feasible_cover_sets(params, demands)
                    cover_opts = covers if variant.random_cover else covers[:1]
                    for cover in cover_opts:
                        block_opts = [
                            sch.block_support(params, cover, demands[k], slots[k])
                            if variant.random_fill
                            else [sch.fill_block(params, cover, demands[k], slots[k])]
                            for k in range(params.n_users)
                        ]
                        p_deliver = Fraction(1, len(cover_opts) * math.prod(len(b) for b in block_opts))
                        for blocks in itertools.product(*block_opts):
                            expanded = tuple(v for block in blocks for v in block)
                            masked = tuple(relab[v] for v in expanded)
                            record = DeliveryRecord(cover, expanded, masked)
                            broadcast, _ = sch.deliver(params, library, demands, rand, record)
                            outcome = _canonical_outcome(params, broadcast, cache, demands[observer])
                            yield demands, slots, masked, outcome, p_place * p_deliver


@dataclass
class MiReport:
    """Result of an exact mutual-information audit.

    ``value`` is Fraction(0) exactly when the per-realization conditional laws
    agree (rational-equality certificate); otherwise it is a float in base-q
    units, strictly positive, with a witness realization attached.
    """

    conditional_laws_equal: bool
    value: Fraction | float
    witness: tuple | None
    cardinalities: dict[str, int]
    observer: int
    target: str
    wall_time_s: float


def exact_mutual_information(params: SchemeParams, observer: int = 0, *, target: str = "others",
                             variant: Variant = FULL, prior: Mapping[Demands, Fraction] | None = None,
                             budget: int = 10 ** 7) -> MiReport:
    """Exact I(other rows ; broadcast, observer cache, observer row).

    ``target="own"`` instead computes I(observer row ; observation), a sanity
    quantity that must equal the observer row's entropy.  The default prior is
    uniform over all demand matrices; conditional-law equality is checked
    per-realization and certifies zero for every prior at once.
    """
    if not 0 <= observer < params.n_users:
        raise ValueError("observer out of range")
    if target not in ("others", "own"):
        raise ValueError("target must be 'others' or 'own'")
    total, cards = _joint_atom_count(params, variant)
    _check_budget(total, budget, "joint-law enumeration")
    mats = list(sch.all_demand_matrices(params))
    if prior is None:
        prior = {m: Fraction(1, len(mats)) for m in mats}
    else:
        prior = dict(prior)
        if sum(prior.values(), Fraction(0)) != 1 or set(prior) != set(mats):
            raise ValueError("prior must assign exact mass to every demand matrix, summing to 1")

    start = time.perf_counter()
    per_demand_law: dict[Demands, dict[tuple, Fraction]] = {m: {} for m in mats}
    for demands, _slots, _masked, outcome, p in _enumerate_joint(params, observer, variant):
        law = per_demand_law[demands]
        law[outcome] = law.get(outcome, Fraction(0)) + p

    # per-realization check: the conditional outcome law may depend on the
    # observer's own row only
    classes: dict[tuple[int, ...], list[Demands]] = {}
    for m in mats:
        classes.setdefault(m[observer], []).append(m)
    equal = True
    witness = None
    for row, members in classes.items():
        base = per_demand_law[members[0]]
        for other in members[1:]:
            if per_demand_law[other] != base:
                equal = False
                keys = set(base) | set(per_demand_law[other])
                bad = next(k for k in keys if base.get(k, Fraction(0)) != per_demand_law[other].get(k, Fraction(0)))
                witness = (members[0], other, bad)
                break
        if not equal:
            break

    def _target_key(m: Demands) -> tuple:
        if target == "own":
            return m[observer]
        return tuple(r for i, r in enumerate(m) if i != observer)

    joint: dict[tuple[tuple, tuple], Fraction] = {}
    for m in mats:
        for outcome, p in per_demand_law[m].items():
            key = (_target_key(m), outcome)
            joint[key] = joint.get(key, Fraction(0)) + prior[m] * p

    marg_t: dict[tuple, Fraction] = {}
    marg_o: dict[tuple, Fraction] = {}
    for (t, o), p in joint.items():
        marg_t[t] = marg_t.get(t, Fraction(0)) + p
        marg_o[o] = marg_o.get(o, Fraction(0)) + p

    factorizes = all(p == marg_t[t] * marg_o[o] for (t, o), p in joint.items())
    if target == "others" and equal:
        value: Fraction | float = Fraction(0)
        if not factorizes:
            raise RuntimeError("conditional laws equal but joint does not factorize")
    elif factorizes:
        value = Fraction(0)
    else:
        acc = 0.0
        logq = math.log(params.q)
        for (t, o), p in joint.items():
            ratio = p / (marg_t[t] * marg_o[o])
            acc += float(p) * math.log(float(ratio)) / logq
        value = acc
        if witness is None:
            witness = next(((t, o) for (t, o), p in joint.items() if p != marg_t[t] * marg_o[o]), None)
    return MiReport(
        conditional_laws_equal=equal,
        value=value,
        witness=witness,
        cardinalities=cards,
        observer=observer,
        target=target,
        wall_time_s=time.perf_counter() - start,
    )


def masked_marginal_via_joint(params: SchemeParams, demands: Demands, observer: int,
                              selector: tuple[int, ...], variant: Variant = FULL,
                              budget: int = 10 ** 7) -> dict[tuple[int, ...], Fraction]:
    """Marginal law of the masked demand extracted from the full joint
    enumeration (libraries included), conditioned on the observer's slot
    tuple.  Must reproduce masked_demand_law exactly; used as a consistency
    oracle for the two enumeration paths."""
    demands = sch.validate_demands(params, demands)
    total, _ = _joint_atom_count(params, variant)
    _check_budget(total, budget, "joint-law enumeration")
    n_slot_opts = len(sch.slot_support(params)) if variant.random_slots else 1
    law: dict[tuple[int, ...], Fraction] = {}
    for mat, slots, masked, _outcome, p in _enumerate_joint(params, observer, variant):
        if mat != demands or slots[observer] != tuple(selector):
            continue
        law[masked] = law.get(masked, Fraction(0)) + p * n_slot_opts
    total_mass = sum(law.values(), Fraction(0))
    if total_mass != 1:
        raise RuntimeError(f"marginal mass {total_mass} != 1")
    return law


# ---------------------------------------------------------------------------
# Chi-square smoke test for large instances
# ---------------------------------------------------------------------------

_Z_QUANTILES = {0.95: 1.6448536269514722, 0.99: 2.3263478740408408, 0.999: 3.090232306167813}


def chi_square_quantile(dof: int, p: float = 0.999) -> float:
    """Wilson-Hilferty approximation of the chi-square quantile; accurate to a
    fraction of a percent for the large dof used here."""
    if dof < 1:
        raise ValueError("dof must be positive")
    try:
        z = _Z_QUANTILES[p]
    except KeyError:
        raise ValueError(f"unsupported quantile {p}; choose from {sorted(_Z_QUANTILES)}") from None
    c = 2.0 / (9.0 * dof)
    return dof * (1.0 - c + z * math.sqrt(c)) ** 3


@dataclass
class ChiSquareReport:
    statistic: float
    dof: int
    threshold: float
    passed: bool
    runs: int
    support_size: int
    outside_support: int


def empirical_law_check(params: SchemeParams, demands: Demands, observer: int,
                        selector: tuple[int, ...], runs: int, seed: int,
                        variant: Variant = FULL, quantile: float = 0.999) -> ChiSquareReport:
    """Chi-square test of sampled masked demands against the uniform law,
    holding the observer's slot tuple fixed and resampling everything else."""
    demands = sch.validate_demands(params, demands)
    support = list(restricted_vectors(params))
    if runs < 10 * len(support):
        raise ValueError(f"need at least {10 * len(support)} runs for {len(support)} support points, got {runs}")
    counts: dict[tuple[int, ...], int] = {}
    for i in range(runs):
        streams = SeedStreams(seed, prefix=f"run{i}:")
        rand = sample_with_fixed_observer(params, streams, observer, selector, variant)
        record = sch.sample_delivery(params, demands, rand, streams, variant)
        counts[record.masked] = counts.get(record.masked, 0) + 1
    support_set = set(support)
    outside = sum(c for key, c in counts.items() if key not in support_set)
    expected = runs / len(support)
    statistic = sum((counts.get(key, 0) - expected) ** 2 / expected for key in support)
    if outside:
        statistic = math.inf
    dof = len(support) - 1
    threshold = chi_square_quantile(dof, quantile)
    return ChiSquareReport(
        statistic=statistic,
        dof=dof,
        threshold=threshold,
        passed=statistic <= threshold,
        runs=runs,
        support_size=len(support),
        outside_support=outside,
    )


def sample_with_fixed_observer(params: SchemeParams, streams: SeedStreams, observer: int,
                               selector: tuple[int, ...], variant: Variant = FULL) -> PlacementRandomness:
    """Placement randomness with the observer's slot tuple pinned (the audited
    law conditions on it) and every other stage drawn as usual."""
    rand = sch.sample_placement_randomness(params, streams, variant)
    slots = list(rand.slots)
    slots[observer] = tuple(selector)
    return PlacementRandomness(rand.relabeling, tuple(slots))
