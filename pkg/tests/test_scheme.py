"""Private multi-demand scheme tests: cover sets, placement layout, delivery
randomness, decoding, measured memory/rate, and trace replay."""

import itertools
from fractions import Fraction

import pytest

from privcache import scheme, ucc
from privcache.scheme import (
    FULL,
    PLAIN_BASELINE,
    DeliveryRecord,
    PlacementRandomness,
    SchemeParams,
    SeedStreams,
    block_support,
    cache_size,
    decode_user,
    deliver,
    feasible_cover_sets,
    place_caches,
    run_simulation,
    sample_delivery,
    sample_placement_randomness,
    slot_support,
    validate_demands,
)
from privcache.ucc import Library, RestrictedDemand, is_restricted


P522 = SchemeParams(5, 2, 2, r=1)


def test_params_derived_quantities():
    assert P522.n_active == 4
    assert P522.n_virtual == 8
    assert P522.file_len == 8
    assert SchemeParams(3, 2, 1, r=1).n_active == 2
    assert SchemeParams(2, 2, 1, r=4).n_virtual == 4


def test_params_validation():
    with pytest.raises(ValueError):
        SchemeParams(5, 2, 2, r=16)  # K * n_active = 8 caps r
    with pytest.raises(ValueError):
        SchemeParams(5, 2, 6, r=1)  # L > N
    with pytest.raises(ValueError):
        SchemeParams(5, 2, 2, r=1, q=6)


def test_validate_demands():
    assert validate_demands(P522, [[0, 1], [0, 2]]) == ((0, 1), (0, 2))
    with pytest.raises(ValueError):
        validate_demands(P522, [[0, 0], [0, 1]])
    with pytest.raises(ValueError):
        validate_demands(P522, [[0, 5], [0, 1]])
    with pytest.raises(ValueError):
        validate_demands(P522, [[0, 1]])


def test_feasible_cover_sets_families():
    assert feasible_cover_sets(P522, ((0, 1), (0, 1))) == [
        (0, 1, 2, 3), (0, 1, 2, 4), (0, 1, 3, 4)]
    assert feasible_cover_sets(P522, ((0, 1), (0, 2))) == [(0, 1, 2, 3), (0, 1, 2, 4)]
    assert feasible_cover_sets(P522, ((0, 1), (2, 3))) == [(0, 1, 2, 3)]


def test_feasible_cover_sets_degenerate_full_round():
    # n_active == N: the cover set is forced to the whole label set
    p = SchemeParams(2, 2, 1, r=1)
    assert feasible_cover_sets(p, ((0,), (1,))) == [(0, 1)]
    assert feasible_cover_sets(p, ((0,), (0,))) == [(0, 1)]


def test_placement_slots_hold_chosen_subfiles():
    lib = Library.ramp(P522.field, 5, P522.file_len)
    rand = PlacementRandomness(relabeling=(2, 0, 4, 1, 3), slots=((0, 2), (1, 3)))
    caches = place_caches(P522, lib, rand)
    # r=1: virtual user u stores subfile {u}, one symbol; user 0 chose slots 0, 2
    assert sorted(caches[0].slots_by_label[rand.relabeling[3]].keys()) == [0, 2]
    # user 1 embeds at virtual users 4+1, 4+3 -> positions 5 and 7
    assert sorted(caches[1].slots_by_label[rand.relabeling[0]].keys()) == [5, 7]
    for n in range(5):
        stored = caches[0].slots_by_label[rand.relabeling[n]]
        for i, sym in stored.items():
            assert sym == lib.rows[n][i]


def test_cache_size_examples():
    rand = PlacementRandomness((0, 1, 2, 3, 4), ((0, 2), (1, 3)))
    assert cache_size(P522, rand) == Fraction(5, 4)
    assert cache_size(P522, worst_case=True) == Fraction(5, 4)
    assert cache_size(SchemeParams(5, 2, 2, r=0), worst_case=True) == 0
    assert cache_size(SchemeParams(5, 2, 2, r=8), worst_case=True) == 5
    with pytest.raises(ValueError):
        cache_size(P522)


def test_cache_size_matches_formula_for_every_slot_choice():
    for r in range(0, 9):
        p = SchemeParams(5, 2, 2, r=r)
        kv = p.n_virtual
        from privcache.exact import binomial

        formula = Fraction((binomial(kv, r) - binomial(kv - 2, r)) * 5, binomial(kv, r))
        for sel in slot_support(p):
            rand = PlacementRandomness(tuple(range(5)), (sel, sel))
            assert cache_size(p, rand) == formula


def test_block_support_size_and_pinning():
    covers = feasible_cover_sets(P522, ((0, 1), (0, 2)))
    for cover in covers:
        sup = block_support(P522, cover, (0, 2), (1, 3))
        assert len(sup) == 2  # (n_active - L)! = 2! = 2
        for block in sup:
            assert block[1] == 0 and block[3] == 2
            assert sorted(block) == list(cover)


def test_block_support_size_for_every_cover_row_selector():
    import math

    p = SchemeParams(4, 2, 2, r=1)  # n_active 4, every cover is {0,1,2,3}
    expected = math.factorial(p.n_active - p.demands_per_user)
    for row in itertools.permutations(range(4), 2):
        for sel in slot_support(p):
            sup = block_support(p, (0, 1, 2, 3), row, sel)
            assert len(sup) == len(set(sup)) == expected
            for block in sup:
                assert all(block[s] == d for s, d in zip(sel, row))


def test_block_fully_pinned_when_demands_fill_the_block():
    # L = n_active: no free positions, exactly one admissible arrangement
    p = SchemeParams(2, 1, 2, r=1)
    assert p.n_active == 2
    sup = block_support(p, (0, 1), (1, 0), (0, 1))
    assert sup == [(1, 0)]
    tr = run_simulation(p, seed=4)
    assert tr.correct_all


def test_hand_worked_realization_is_in_support():
    # demands [0,1;0,2], slots S0=(0,2), S1=(1,3), cover {0,1,2,3}:
    # expanded (0,2,1,3, 1,0,3,2) satisfies every pinning constraint
    demands = ((0, 1), (0, 2))
    cover = (0, 1, 2, 3)
    b0, b1 = (0, 2, 1, 3), (1, 0, 3, 2)
    assert b0 in block_support(P522, cover, demands[0], (0, 2))
    assert b1 in block_support(P522, cover, demands[1], (1, 3))
    assert b0[0] == 0 and b0[2] == 1  # d_{0,l} at slots (0, 2)
    assert b1[1] == 0 and b1[3] == 2  # d_{1,l} at slots (1, 3)


def test_masked_demand_applies_relabeling():
    streams = SeedStreams(3)
    rand = sample_placement_randomness(P522, streams)
    record = sample_delivery(P522, ((0, 1), (0, 2)), rand, streams)
    assert record.masked == tuple(rand.relabeling[v] for v in record.expanded)
    assert set(record.expanded[:4]) == set(record.cover_set)


def test_delivery_sweep_masked_demand_restricted_and_rate():
    lib = Library.ramp(P522.field, 5, 8)
    for seed in range(1000):
        streams = SeedStreams(seed)
        demands = scheme.sample_demands(P522, streams.rng("demands"))
        rand = sample_placement_randomness(P522, streams)
        broadcast, record = deliver(P522, lib, demands, rand, streams=streams)
        assert is_restricted(broadcast.masked_demand, 4)
        assert broadcast.segment_count == 22
        assert scheme.measured_rate(P522, broadcast) == Fraction(11, 4)


def test_relabeled_encode_identity():
    """Encoding the relabeled library under the masked demand must equal
    encoding the original library under the raw expanded demand."""
    lib = Library.ramp(P522.field, 5, 8)
    streams = SeedStreams(17)
    demands = ((0, 1), (0, 2))
    rand = sample_placement_randomness(P522, streams)
    record = sample_delivery(P522, demands, rand, streams)
    broadcast, _ = deliver(P522, lib, demands, rand, record)
    direct = ucc.encode(P522.ucc, RestrictedDemand(record.expanded, 4), lib)
    assert {s: v.entries for s, v in broadcast.inner.segments.items()} == \
           {s: v.entries for s, v in direct.segments.items()}


@pytest.mark.parametrize("r", [0, 1, 2, 8])
def test_decode_all_users_all_slots(r):
    p = SchemeParams(5, 2, 2, r=r)
    for seed in (0, 1, 2):
        tr = run_simulation(p, seed)
        assert tr.correct_all
        tr2 = run_simulation(p, seed, decoder="structural")
        assert tr2.correct_all


def test_decode_uses_only_broadcast_and_cache():
    """Rebuild the broadcast from its serialized trace record and decode with
    it: proves decoding needs nothing beyond (broadcast, own cache)."""
    from privcache.gf import SymbolVector

    lib = Library.ramp(P522.field, 5, 8)
    streams = SeedStreams(5)
    demands = ((3, 1), (4, 0))
    rand = sample_placement_randomness(P522, streams)
    caches = place_caches(P522, lib, rand)
    broadcast, record = deliver(P522, lib, demands, rand, streams=streams)
    rec = broadcast.inner.trace_record()
    rebuilt_inner = ucc.Broadcast(
        params=P522.ucc,
        demand=RestrictedDemand(tuple(rec["demand"]), 4),
        segments={
            tuple(s["users"]): SymbolVector(P522.field, tuple(s["symbols"]))
            for s in rec["segments"]
        },
        signed=rec["signed"],
    )
    rebuilt = scheme.PrivateBroadcast(rebuilt_inner)
    for k in range(2):
        for l in range(2):
            assert decode_user(P522, k, l, rebuilt, caches[k]) == lib.rows[demands[k][l]]


def test_three_user_groups_end_to_end():
    p = SchemeParams(3, 3, 1, r=2)
    for seed in range(6):
        tr = run_simulation(p, seed)
        assert tr.correct_all
        assert run_simulation(p, seed, decoder="structural").correct_all


def test_simulation_trace_deterministic_and_replayable():
    a = run_simulation(P522, 42).to_json_dict()
    b = run_simulation(P522, 42).to_json_dict()
    c = run_simulation(P522, 43).to_json_dict()
    assert a == b
    assert a != c
    assert a["memory"] == [5, 4] and a["rate"] == [11, 4]
    assert a["segment_count"] == 22
    assert a["correct_all"] is True


def test_summary_row_fields():
    row = run_simulation(P522, 1).summary_row()
    assert row == {"N": 5, "K": 2, "L": 2, "r": 1, "M_num": 5, "M_den": 4,
                   "R_num": 11, "R_den": 4, "correct_all": True}


def test_measured_memory_and_rate_match_formula_across_r():
    from privcache.exact import binomial

    for n, k, big_l in ((3, 2, 1), (2, 2, 1), (4, 2, 2)):
        p0 = SchemeParams(n, k, big_l, r=0)
        kv = p0.n_virtual
        for r in range(kv + 1):
            p = SchemeParams(n, k, big_l, r=r)
            tr = run_simulation(p, seed=r)
            m = Fraction((binomial(kv, r) - binomial(kv - big_l, r)) * n, binomial(kv, r))
            rate = Fraction(binomial(kv, r + 1) - binomial(kv - p.n_active, r + 1), binomial(kv, r))
            assert tr.memory == m
            assert tr.rate == rate
            assert tr.correct_all


def test_plain_baseline_variant_reveals_expanded_demand():
    tr = run_simulation(P522, 9, variant=PLAIN_BASELINE)
    assert tr.randomness.relabeling == (0, 1, 2, 3, 4)
    assert tr.randomness.slots == ((0, 1), (0, 1))
    assert tr.record.masked == tr.record.expanded
    assert tr.correct_all  # derandomized, but still a correct caching scheme
