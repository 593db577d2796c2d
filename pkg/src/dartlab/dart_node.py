"""DART forwarding plane.

A DART router keeps state per *route in use*, not per in-flight interest:

* The dart table maps a predecessor's route token to a successor leg along
  a shortest path toward an anchor.  Every interest, data and nack riding
  that route refreshes the entry; an idle timer reclaims it.
* The response-correlation table (RCT) exists only at consumer-facing
  routers and remembers which locally attached consumers wait for a name.

An interest from a neighbour is only accepted if some admissible next hop is
strictly closer to an anchor than the hop budget the interest carries and is
not the neighbour it came from.  A router that cannot offer such a next hop
refuses with a loop nack instead of forwarding — interests can never orbit,
no matter how inconsistent the routing tables are.
"""

from __future__ import annotations

from typing import Dict, List, Optional, Set, Tuple

from .model import (
    CachingMode,
    ContentStore,
    DataPacket,
    Emission,
    Interest,
    MAX_DART,
    Nack,
    NackCode,
    Name,
    Prefix,
)
from .routing import Fib, FibTuple


class DartEntry:
    __slots__ = ("anchor", "predecessor", "predecessor_dart", "successor",
                 "successor_dart", "hop_count", "last_used")

    def __init__(self, anchor, predecessor, predecessor_dart, successor,
                 successor_dart, hop_count, last_used):
        self.anchor = anchor
        self.predecessor = predecessor
        self.predecessor_dart = predecessor_dart
        self.successor = successor
        self.successor_dart = successor_dart
        # hop budget granted to the successor leg; frozen at creation so a
        # route, once vetted, stays monotone end to end
        self.hop_count = hop_count
        self.last_used = last_used


class RctEntry:
    __slots__ = ("pending", "consumers")

    def __init__(self):
        self.pending = False
        self.consumers: Set[str] = set()


class DartRouter:
    def __init__(self, router_id: str, fib: Fib,
                 anchored_prefixes: Tuple[Prefix, ...] = (),
                 caching_mode: CachingMode = CachingMode.EDGE,
                 dart_ttl_ms: float = 10_000.0,
                 store_capacity: Optional[int] = None):
        self.router_id = router_id
        self.fib = fib
        self.anchored_prefixes = tuple(anchored_prefixes)
        self.caching_mode = caching_mode
        self.dart_ttl_ms = dart_ttl_ms
        self.store = ContentStore(store_capacity, on_evict=self._content_evicted)
        self.rct: Dict[Name, RctEntry] = {}
        # every live entry appears in both indexes; origin legs also in _origin
        self.by_pred: Dict[Tuple[str, int], DartEntry] = {}
        self.by_succ: Dict[int, DartEntry] = {}
        self._origin: Dict[Tuple[str, str], DartEntry] = {}  # (anchor, successor)
        self._next_dart = 1
        self.pending_names = 0
        self.aggregated_local = 0
        self.loop_nacks_sent = 0
        self.orphan_data = 0
        self.orphan_nack = 0
        self.evicted_darts = 0

    # -- dart bookkeeping --------------------------------------------------

    def table_size(self) -> int:
        return len(self.by_succ)

    def fresh_dart(self) -> int:
        if len(self.by_succ) >= MAX_DART:
            raise RuntimeError("route token space exhausted")
        d = self._next_dart
        while d in self.by_succ:
            d = d + 1 if d < MAX_DART else 1
        self._next_dart = d + 1 if d < MAX_DART else 1
        return d

    def _add_entry(self, entry: DartEntry) -> DartEntry:
        self.by_pred[(entry.predecessor, entry.predecessor_dart)] = entry
        self.by_succ[entry.successor_dart] = entry
        if entry.predecessor == self.router_id:
            self._origin[(entry.anchor, entry.successor)] = entry
        return entry

    def _drop_entry(self, entry: DartEntry):
        del self.by_pred[(entry.predecessor, entry.predecessor_dart)]
        del self.by_succ[entry.successor_dart]
        if entry.predecessor == self.router_id:
            self._origin.pop((entry.anchor, entry.successor), None)

    def evict_darts(self, now: float) -> int:
        cutoff = now - self.dart_ttl_ms
        stale = [e for e in self.by_succ.values() if e.last_used < cutoff]
        for e in stale:
            self._drop_entry(e)
        self.evicted_darts += len(stale)
        return len(stale)

    def on_link_down(self, neighbor: str) -> int:
        dead = [e for e in self.by_succ.values()
                if e.successor == neighbor or e.predecessor == neighbor]
        for e in dead:
            self._drop_entry(e)
        return len(dead)

    # -- content -----------------------------------------------------------

    def preload(self, data: DataPacket):
        self.store.add_owned(data)

    def _content_evicted(self, name: Name):
        # keep the RCT honest: a satisfied entry whose content is gone again
        # is just dead weight
        e = self.rct.get(name)
        if e is not None and not e.pending:
            del self.rct[name]

    def _anchored(self, name: Name) -> bool:
        for p in self.anchored_prefixes:
            if p.matches(name):
                return True
        return False

    def _maybe_cache(self, data: DataPacket, delivered_locally: bool):
        mode = self.caching_mode
        if mode is CachingMode.ON_PATH or (mode is CachingMode.EDGE and delivered_locally):
            self.store.cache(data)

    # -- loop refusal ------------------------------------------------------

    def dear_check(self, name: Name, hop_count: int,
                   exclude: Optional[str] = None) -> Optional[FibTuple]:
        """Best-ranked next hop strictly closer to an anchor than the given
        hop budget, skipping ``exclude``.  None means the interest must be
        refused: no admissible hop makes forward progress."""
        tuples = self.fib.lookup(name)
        if not tuples:
            return None
        for t in tuples:
            if t.distance < hop_count and t.next_hop != exclude:
                return t
        return None

    # -- packet handlers ---------------------------------------------------

    def on_local_interest(self, consumer: str, name: Name, now: float) -> List[Emission]:
        data = self.store.get(name)
        if data is not None:
            return [Emission(consumer, DataPacket(name, None, data.payload, data.security_payload))]
        entry = self.rct.get(name)
        if entry is not None and entry.pending:
            entry.consumers.add(consumer)
            self.aggregated_local += 1
            return []
        if self._anchored(name):
            return [Emission(consumer, Nack(name, NackCode.NO_CONTENT))]
        tuples = self.fib.lookup(name)
        if not tuples:
            return [Emission(consumer, Nack(name, NackCode.NO_ROUTE))]
        t = tuples[0]  # origin trusts its best route; refusal happens downstream
        leg = self._origin.get((t.anchor, t.next_hop))
        if leg is None:
            sd = self.fresh_dart()
            leg = self._add_entry(DartEntry(t.anchor, self.router_id, sd,
                                            t.next_hop, sd, t.distance, now))
        leg.last_used = now
        if entry is None:
            entry = self.rct[name] = RctEntry()
        entry.pending = True
        entry.consumers.add(consumer)
        self.pending_names += 1
        return [Emission(leg.successor, Interest(name, leg.hop_count, leg.successor_dart))]

    def on_neighbor_interest(self, sender: str, interest: Interest, now: float) -> List[Emission]:
        name = interest.name
        data = self.store.get(name)
        if data is not None:
            return [Emission(sender, DataPacket(name, interest.dart,
                                                data.payload, data.security_payload))]
        if self._anchored(name):
            return [Emission(sender, Nack(name, NackCode.NO_CONTENT, interest.dart))]
        leg = self.by_pred.get((sender, interest.dart))
        if leg is not None:
            # route already vetted when the entry was created
            leg.last_used = now
            return [Emission(leg.successor, Interest(name, leg.hop_count, leg.successor_dart))]
        if self.fib.lookup(name) is None:
            return [Emission(sender, Nack(name, NackCode.NO_ROUTE, interest.dart))]
        t = self.dear_check(name, interest.hop_count, exclude=sender)
        if t is None:
            self.loop_nacks_sent += 1
            return [Emission(sender, Nack(name, NackCode.LOOP, interest.dart))]
        sd = self.fresh_dart()
        leg = self._add_entry(DartEntry(t.anchor, sender, interest.dart,
                                        t.next_hop, sd, t.distance, now))
        return [Emission(t.next_hop, Interest(name, t.distance, sd))]

    def on_data(self, sender: str, data: DataPacket, now: float) -> List[Emission]:
        leg = self.by_succ.get(data.dart)
        if leg is None or leg.successor != sender:
            self.orphan_data += 1
            return []
        leg.last_used = now
        if leg.predecessor != self.router_id:
            self._maybe_cache(data, delivered_locally=False)
            return [Emission(leg.predecessor,
                             DataPacket(data.name, leg.predecessor_dart,
                                        data.payload, data.security_payload))]
        entry = self.rct.get(data.name)
        if entry is None or not entry.pending:
            self._maybe_cache(data, delivered_locally=False)
            return []
        out = [Emission(c, DataPacket(data.name, None, data.payload, data.security_payload))
               for c in sorted(entry.consumers)]
        entry.pending = False
        entry.consumers.clear()
        self.pending_names -= 1
        if self.caching_mode is CachingMode.NONE:
            del self.rct[data.name]
        else:
            self._maybe_cache(data, delivered_locally=True)
        return out

    def on_nack(self, sender: str, nack: Nack, now: float) -> List[Emission]:
        leg = self.by_succ.get(nack.dart)
        if leg is None or leg.successor != sender:
            self.orphan_nack += 1
            return []
        leg.last_used = now
        if leg.predecessor != self.router_id:
            return [Emission(leg.predecessor,
                             Nack(nack.name, nack.code, leg.predecessor_dart))]
        entry = self.rct.get(nack.name)
        if entry is None or not entry.pending:
            return []
        out = [Emission(c, Nack(nack.name, nack.code)) for c in sorted(entry.consumers)]
        del self.rct[nack.name]
        self.pending_names -= 1
        return out

    # -- inspection ----------------------------------------------------------

    def dump_state(self) -> List[str]:
        me = self.router_id
        lines = []
        for (pred, pd) in sorted(self.by_pred):
            e = self.by_pred[(pred, pd)]
            lines.append(f"dart {me} {e.anchor} {pred} {pd} "
                         f"{e.successor} {e.successor_dart} {e.hop_count}")
        for name in sorted(self.rct):
            e = self.rct[name]
            state = "pending" if e.pending else "cached"
            lines.append(" ".join([f"rct {me} {name} {state}", *sorted(e.consumers)]).rstrip())
        return lines
