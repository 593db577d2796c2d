import pytest

from dartlab.dart_node import DartRouter
from dartlab.model import (
    CachingMode,
    DataPacket,
    Interest,
    MAX_DART,
    Nack,
    NackCode,
    Name,
    Prefix,
)
from dartlab.routing import Prefix, Topology, compute_fibs

P = Prefix.parse("/p")
OBJ = Name.parse("/p/1")
OBJ2 = Name.parse("/p/2")


def line_fibs():
    topo = Topology(("a", "b", "c", "d"),
                    {("a", "b"): 1.0, ("b", "c"): 1.0, ("c", "d"): 1.0},
                    {P: ("d",)})
    return topo, compute_fibs(topo)


def make(router_id, fibs, anchored=(), mode=CachingMode.EDGE, **kw):
    return DartRouter(router_id, fibs[router_id], anchored, caching_mode=mode, **kw)


def test_local_interest_creates_origin_leg_and_pending_rct():
    _, fibs = line_fibs()
    a = make("a", fibs)
    out = a.on_local_interest("c1", OBJ, now=0.0)
    assert len(out) == 1
    dst, msg = out[0]
    assert dst == "b" and isinstance(msg, Interest)
    assert msg.hop_count == 3  # distance to anchor via b
    assert a.table_size() == 1 and a.pending_names == 1
    assert a.rct[OBJ].pending and a.rct[OBJ].consumers == {"c1"}
    leg = a.by_succ[msg.dart]
    assert leg.predecessor == "a" and leg.predecessor_dart == msg.dart
    assert leg.successor == "b" and leg.anchor == "d"


def test_local_interest_aggregates_second_consumer():
    _, fibs = line_fibs()
    a = make("a", fibs)
    a.on_local_interest("c1", OBJ, now=0.0)
    out = a.on_local_interest("c2", OBJ, now=1.0)
    assert out == [] and a.aggregated_local == 1
    assert a.rct[OBJ].consumers == {"c1", "c2"}
    assert a.table_size() == 1  # no extra route state for an aggregated ask


def test_origin_leg_shared_across_names_to_same_anchor():
    _, fibs = line_fibs()
    a = make("a", fibs)
    (d1,) = [e.message.dart for e in a.on_local_interest("c1", OBJ, 0.0)]
    (d2,) = [e.message.dart for e in a.on_local_interest("c1", OBJ2, 0.0)]
    assert d1 == d2 and a.table_size() == 1
    assert a.pending_names == 2


def test_local_interest_store_hit_short_circuits():
    _, fibs = line_fibs()
    a = make("a", fibs)
    a.store.cache(DataPacket(OBJ, payload=b"x"))
    out = a.on_local_interest("c1", OBJ, 0.0)
    assert out == [("c1", DataPacket(OBJ, None, b"x"))]
    assert a.table_size() == 0 and not a.rct


def test_local_interest_anchored_paths():
    _, fibs = line_fibs()
    d = make("d", fibs, anchored=(P,))
    assert d.on_local_interest("c1", OBJ, 0.0) == [("c1", Nack(OBJ, NackCode.NO_CONTENT))]
    d.preload(DataPacket(OBJ, payload=b"v"))
    assert d.on_local_interest("c1", OBJ, 0.0) == [("c1", DataPacket(OBJ, None, b"v"))]


def test_local_interest_no_route():
    _, fibs = line_fibs()
    a = make("a", fibs)
    other = Name.parse("/unrouted/x")
    assert a.on_local_interest("c1", other, 0.0) == [("c1", Nack(other, NackCode.NO_ROUTE))]


def test_neighbor_interest_forwards_and_keeps_budget_shrinking():
    _, fibs = line_fibs()
    b = make("b", fibs)
    out = b.on_neighbor_interest("a", Interest(OBJ, 3, 7), now=0.0)
    assert len(out) == 1
    dst, msg = out[0]
    assert dst == "c" and msg.hop_count == 2 and msg.dart != 7
    leg = b.by_pred[("a", 7)]
    assert leg.successor == "c" and leg.successor_dart == msg.dart
    assert leg.hop_count == 2 and b.table_size() == 1


def test_neighbor_interest_fast_path_reuses_leg():
    _, fibs = line_fibs()
    b = make("b", fibs)
    (first,) = b.on_neighbor_interest("a", Interest(OBJ, 3, 7), now=0.0)
    (again,) = b.on_neighbor_interest("a", Interest(OBJ2, 3, 7), now=5.0)
    assert again == ("c", Interest(OBJ2, 2, first.message.dart))
    assert b.table_size() == 1
    assert b.by_pred[("a", 7)].last_used == 5.0


def test_neighbor_interest_refuses_without_forward_progress():
    _, fibs = line_fibs()
    b = make("b", fibs)
    # budget 2: c is at distance 2 (not strictly closer), a is excluded
    out = b.on_neighbor_interest("a", Interest(OBJ, 2, 9), now=0.0)
    assert out == [("a", Nack(OBJ, NackCode.LOOP, 9))]
    assert b.loop_nacks_sent == 1 and b.table_size() == 0


def test_neighbor_interest_excludes_sender_even_if_closer():
    topo = Topology(("a", "b", "z"),
                    {("a", "b"): 1.0, ("a", "z"): 1.0, ("b", "z"): 1.0},
                    {P: ("z",)})
    fibs = compute_fibs(topo)
    b = make("b", fibs)
    # from z itself with a huge budget: a (distance 2) admissible, z excluded
    (out,) = b.on_neighbor_interest("z", Interest(OBJ, 9, 3), now=0.0)
    assert out.dst == "a"


def test_neighbor_interest_store_anchor_and_no_route():
    _, fibs = line_fibs()
    b = make("b", fibs)
    b.store.cache(DataPacket(OBJ, payload=b"x"))
    assert b.on_neighbor_interest("a", Interest(OBJ, 3, 7), 0.0) == \
        [("a", DataPacket(OBJ, 7, b"x"))]
    d = make("d", fibs, anchored=(P,))
    assert d.on_neighbor_interest("c", Interest(OBJ, 1, 5), 0.0) == \
        [("c", Nack(OBJ, NackCode.NO_CONTENT, 5))]
    other = Name.parse("/unrouted/x")
    assert b.on_neighbor_interest("a", Interest(other, 4, 8), 0.0) == \
        [("a", Nack(other, NackCode.NO_ROUTE, 8))]
    assert b.loop_nacks_sent == 0


def relay_with_leg(mode=CachingMode.EDGE):
    _, fibs = line_fibs()
    b = make("b", fibs, mode=mode)
    (fwd,) = b.on_neighbor_interest("a", Interest(OBJ, 3, 7), now=0.0)
    return b, fwd.message.dart


def test_data_relayed_back_swaps_darts():
    b, sd = relay_with_leg()
    out = b.on_data("c", DataPacket(OBJ, sd, b"v"), now=10.0)
    assert out == [("a", DataPacket(OBJ, 7, b"v"))]
    assert b.by_succ[sd].last_used == 10.0  # leg survives for reuse


def test_data_orphans_dropped_without_caching():
    b, sd = relay_with_leg(mode=CachingMode.ON_PATH)
    assert b.on_data("c", DataPacket(OBJ, 12345, b"v"), 0.0) == []
    assert b.on_data("a", DataPacket(OBJ, sd, b"v"), 0.0) == []  # wrong side
    assert b.orphan_data == 2
    assert b.store.get(OBJ) is None


def test_data_caching_modes_at_relay():
    for mode, cached in [(CachingMode.ON_PATH, True), (CachingMode.EDGE, False),
                         (CachingMode.NONE, False)]:
        b, sd = relay_with_leg(mode=mode)
        b.on_data("c", DataPacket(OBJ, sd, b"v"), 0.0)
        assert (b.store.get(OBJ) is not None) == cached, mode


def origin_with_pending(mode=CachingMode.EDGE):
    _, fibs = line_fibs()
    a = make("a", fibs, mode=mode)
    (fwd,) = a.on_local_interest("c2", OBJ, 0.0)
    a.on_local_interest("c1", OBJ, 0.0)
    return a, fwd.message.dart


def test_data_at_origin_fans_out_sorted_and_settles_rct():
    a, sd = origin_with_pending()
    out = a.on_data("b", DataPacket(OBJ, sd, b"v"), now=3.0)
    assert [e.dst for e in out] == ["c1", "c2"]
    assert all(e.message == DataPacket(OBJ, None, b"v") for e in out)
    assert a.pending_names == 0
    assert not a.rct[OBJ].pending and a.rct[OBJ].consumers == set()
    assert a.store.get(OBJ) is not None  # edge router delivered locally
    # content now serves repeats without any new route state
    assert a.on_local_interest("c9", OBJ, 4.0) == [("c9", DataPacket(OBJ, None, b"v"))]


def test_data_at_origin_caching_none_drops_rct_entry():
    a, sd = origin_with_pending(mode=CachingMode.NONE)
    a.on_data("b", DataPacket(OBJ, sd, b"v"), 3.0)
    assert OBJ not in a.rct and a.pending_names == 0
    assert a.store.get(OBJ) is None


def test_late_data_after_nack_is_not_delivered():
    a, sd = origin_with_pending()
    a.on_nack("b", Nack(OBJ, NackCode.LOOP, sd), 1.0)
    assert a.on_data("b", DataPacket(OBJ, sd, b"v"), 2.0) == []


def test_nack_relay_and_origin():
    b, sd = relay_with_leg()
    assert b.on_nack("c", Nack(OBJ, NackCode.LOOP, sd), 1.0) == \
        [("a", Nack(OBJ, NackCode.LOOP, 7))]
    assert sd in b.by_succ  # refusal does not tear down the leg

    a, sd2 = origin_with_pending()
    out = a.on_nack("b", Nack(OBJ, NackCode.NO_CONTENT, sd2), 1.0)
    assert out == [("c1", Nack(OBJ, NackCode.NO_CONTENT)),
                   ("c2", Nack(OBJ, NackCode.NO_CONTENT))]
    assert OBJ not in a.rct and a.pending_names == 0

    assert a.on_nack("b", Nack(OBJ, NackCode.LOOP, 999), 1.0) == []
    assert a.orphan_nack == 1


def test_evict_darts_is_idle_based():
    b, sd = relay_with_leg()
    b.on_neighbor_interest("a", Interest(OBJ2, 3, 8), now=5_000.0)
    assert b.evict_darts(now=11_000.0) == 1  # only the leg idle since t=0
    assert b.table_size() == 1 and ("a", 8) in b.by_pred
    assert b.evicted_darts == 1
    # refreshing keeps an entry alive indefinitely
    b.on_neighbor_interest("a", Interest(OBJ, 3, 8), now=14_000.0)
    assert b.evict_darts(now=15_000.0) == 0


def test_evicted_origin_leg_is_recreated_on_next_ask():
    a, sd = origin_with_pending()
    a.evict_darts(now=60_000.0)
    assert a.table_size() == 0
    (fwd,) = a.on_local_interest("c3", OBJ2, 60_001.0)
    assert a.table_size() == 1 and fwd.message.dart != sd


def test_fresh_dart_wraps_and_skips_in_use():
    _, fibs = line_fibs()
    a = make("a", fibs)
    a._next_dart = MAX_DART
    d1 = a.fresh_dart()
    assert d1 == MAX_DART
    a.by_succ[MAX_DART] = object()
    a._next_dart = MAX_DART
    assert a.fresh_dart() == 1  # wrapped past the in-use token


def test_on_link_down_purges_both_sides():
    b, sd = relay_with_leg()
    b.on_neighbor_interest("c", Interest(OBJ, 9, 44), now=0.0)  # leg toward a? no: c->b
    # entries: pred=a/succ=c and pred=c/succ=a... second depends on FIB; just count
    n = b.table_size()
    assert b.on_link_down("c") == n  # every current leg touches c
    assert b.table_size() == 0


def test_content_eviction_clears_settled_rct():
    _, fibs = line_fibs()
    a = DartRouter("a", fibs["a"], caching_mode=CachingMode.EDGE, store_capacity=1)
    (f1,) = a.on_local_interest("c1", OBJ, 0.0)
    a.on_data("b", DataPacket(OBJ, f1.message.dart, b"1"), 1.0)
    (f2,) = a.on_local_interest("c1", OBJ2, 2.0)
    a.on_data("b", DataPacket(OBJ2, f2.message.dart, b"2"), 3.0)
    assert OBJ not in a.rct          # evicted content took its rct entry along
    assert not a.rct[OBJ2].pending
    assert a.store.evictions == 1


def test_dump_state_shape():
    a, sd = origin_with_pending()
    lines = a.dump_state()
    assert f"dart a d a {sd} b {sd} 3" in lines
    assert "rct a /p/1 pending c1 c2" in lines
