"""NDN-style baseline: pending-interest table, one entry per in-flight name.

Classic stateful forwarding.  Every distinct name being fetched holds a PIT
entry at every router on its path; entries either pop when data returns or
sit until their lifetime runs out.  Loops are caught (probabilistically) by
nonce matching, and this baseline keeps the historical behaviour of treating
a refusal as silence: routers drop nacks rather than propagate them, so a
consumer behind a refused interest simply waits for its timeout.
"""

from __future__ import annotations

from typing import Dict, List, Optional, Set, Tuple

from .model import (
    CachingMode,
    ContentStore,
    DataPacket,
    Emission,
    Nack,
    NackCode,
    Name,
    NdnInterest,
    Prefix,
)
from .routing import Fib


class PitEntry:
    __slots__ = ("in_records", "out_interfaces", "created", "expiry")

    def __init__(self, created: float, expiry: float):
        # nonce -> interface the interest arrived on (insertion-ordered, so
        # data fan-out is deterministic)
        self.in_records: Dict[int, str] = {}
        self.out_interfaces: Set[str] = set()
        self.created = created
        self.expiry = expiry


class NdnRouter:
    def __init__(self, router_id: str, fib: Fib,
                 anchored_prefixes: Tuple[Prefix, ...] = (),
                 caching_mode: CachingMode = CachingMode.EDGE,
                 pit_lifetime_ms: float = 4_000.0,
                 store_capacity: Optional[int] = None):
        self.router_id = router_id
        self.fib = fib
        self.anchored_prefixes = tuple(anchored_prefixes)
        self.caching_mode = caching_mode
        self.pit_lifetime_ms = pit_lifetime_ms
        self.store = ContentStore(store_capacity)
        self.pit: Dict[Name, PitEntry] = {}
        self.local_consumers: Set[str] = set()
        self.seen_nonces: Set[int] = set()
        self.aggregated = 0
        self.loop_nacks_sent = 0
        self.nacks_dropped = 0
        self.orphan_data = 0
        self.expired_pit = 0

    def table_size(self) -> int:
        return len(self.pit)

    def preload(self, data: DataPacket):
        self.store.add_owned(data)

    def _anchored(self, name: Name) -> bool:
        for p in self.anchored_prefixes:
            if p.matches(name):
                return True
        return False

    def on_interest(self, sender: str, interest: NdnInterest, now: float) -> List[Emission]:
        """Handle an interest from ``sender`` — a neighbour router or a local
        consumer (consumers are registered via ``local_consumers``)."""
        name, nonce = interest.name, interest.nonce
        data = self.store.get(name)
        if data is not None:
            return [Emission(sender, DataPacket(name, None, data.payload, data.security_payload))]
        if nonce in self.seen_nonces:
            # the same interest came around again: classic duplicate kill
            self.loop_nacks_sent += 1
            return [Emission(sender, Nack(name, NackCode.LOOP))]
        self.seen_nonces.add(nonce)
        entry = self.pit.get(name)
        if entry is not None:
            entry.in_records[nonce] = sender
            self.aggregated += 1
            return []
        if self._anchored(name):
            return [Emission(sender, Nack(name, NackCode.NO_CONTENT))]
        tuples = self.fib.lookup(name)
        nxt = None
        if tuples:
            for t in tuples:
                if t.next_hop != sender:
                    nxt = t
                    break
        if nxt is None:
            return [Emission(sender, Nack(name, NackCode.NO_ROUTE))]
        entry = PitEntry(created=now, expiry=now + self.pit_lifetime_ms)
        entry.in_records[nonce] = sender
        entry.out_interfaces.add(nxt.next_hop)
        self.pit[name] = entry
        return [Emission(nxt.next_hop, NdnInterest(name, nonce))]

    def on_data(self, sender: str, data: DataPacket, now: float) -> List[Emission]:
        entry = self.pit.pop(data.name, None)
        if entry is None:
            self.orphan_data += 1
            return []
        out = [Emission(iface, DataPacket(data.name, None, data.payload, data.security_payload))
               for iface in entry.in_records.values()]
        mode = self.caching_mode
        if mode is CachingMode.ON_PATH:
            self.store.cache(data)
        elif mode is CachingMode.EDGE:
            if any(iface in self.local_consumers for iface in entry.in_records.values()):
                self.store.cache(data)
        return out

    def on_nack(self, sender: str, nack: Nack, now: float) -> List[Emission]:
        # baseline routers swallow refusals; downstream consumers are left
        # to their retransmission timers
        self.nacks_dropped += 1
        return []

    def expire_pit(self, now: float) -> int:
        dead = [n for n, e in self.pit.items() if e.expiry <= now]
        for n in dead:
            del self.pit[n]
        self.expired_pit += len(dead)
        return len(dead)

    def dump_state(self) -> List[str]:
        lines = []
        for name in sorted(self.pit):
            e = self.pit[name]
            ins = " ".join(f"{nonce},{iface}" for nonce, iface in e.in_records.items())
            outs = " ".join(sorted(e.out_interfaces))
            lines.append(f"pit {self.router_id} {name} {ins} {outs}")
        return lines
