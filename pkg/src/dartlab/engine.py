"""Deterministic discrete-event simulator.

Links are pure fixed delays with unbounded capacity and zero router
processing time, so end-to-end delay is exactly the sum of link delays a
request and its response traverse.  One run = one event loop; all
randomness comes from string-seeded private generators, so identical
inputs give byte-identical reports regardless of interpreter hash seed.

With audits on (DART runs), every forwarded interest is checked live for
strict hop-budget descent and for never revisiting a router that already
forwarded it; a violation aborts the run with the full per-interest chain
plus the most recent deliveries as a counterexample.
"""

from __future__ import annotations

import heapq
import math
import random
from bisect import bisect_right
from collections import deque
from dataclasses import dataclass, field
from enum import Enum
from itertools import accumulate
from typing import Dict, List, Optional, Sequence, Tuple

from .dart_node import DartRouter
from .model import (
    CachingMode,
    DataPacket,
    Interest,
    Nack,
    Name,
    NdnInterest,
    _esc_name,
)
from .ndn_node import NdnRouter
from .routing import Fib, Topology


class Scheme(Enum):
    DART = "dart"
    NDN = "ndn"


# event kinds, cheapest-to-compare first in rough frequency order
_DELIVER, _REQUEST, _RETRY, _SAMPLE, _SWEEP, _FIB_EDIT = range(6)


class AuditError(Exception):
    """A live invariant check failed; carries the counterexample."""

    def __init__(self, kind: str, router: str, message, chain: Tuple[str, ...],
                 recent: List[str]):
        self.kind = kind
        self.router = router
        self.message = message
        self.chain = chain
        self.recent = recent
        detail = "\n".join([
            f"audit violation: {kind}",
            f"  at router: {router}",
            f"  message:   {message!r}",
            f"  forward chain so far: {' -> '.join(chain) or '(origin)'}",
            "  recent deliveries:",
            *(f"    {line}" for line in recent),
        ])
        super().__init__(detail)


@dataclass(frozen=True)
class WorkloadSpec:
    """Per-consumer Poisson request process over a Zipf-ranked catalog."""

    zipf_alpha: float
    catalog_size: int
    per_router_rate: float  # requests per second per consumer
    duration: float         # seconds
    seed: object = 0

    def __post_init__(self):
        if self.zipf_alpha < 0:
            raise ValueError("zipf_alpha must be >= 0")
        if self.catalog_size < 1:
            raise ValueError("catalog_size must be >= 1")
        if self.per_router_rate <= 0 or self.duration <= 0:
            raise ValueError("rate and duration must be positive")


def zipf_cumulative(alpha: float, size: int) -> List[float]:
    return list(accumulate((k + 1) ** -alpha for k in range(size)))


def _consumer_stream(spec: WorkloadSpec, consumer: str, cum: List[float]):
    rng = random.Random(f"workload:{spec.seed}:{consumer}")
    total = cum[-1]
    end = spec.duration * 1000.0
    last = spec.catalog_size - 1
    t = 0.0
    while True:
        t += rng.expovariate(spec.per_router_rate) * 1000.0
        if t >= end:
            return
        idx = bisect_right(cum, rng.random() * total)
        yield (t, consumer, idx if idx <= last else last)


def generate_workload(spec: WorkloadSpec, consumers: Sequence[str]):
    """Time-ordered stream of (time_ms, consumer, object_index) across all
    consumers; fully determined by spec.seed."""
    cum = zipf_cumulative(spec.zipf_alpha, spec.catalog_size)
    return heapq.merge(*(_consumer_stream(spec, c, cum) for c in sorted(consumers)))


def sample_table_sizes(routers: Dict[str, object]) -> Dict[str, tuple]:
    """Forwarding-state size snapshot: (PIT entries,) for the baseline,
    (dart entries incl. origin legs, pending RCT names) for DART."""
    out = {}
    for rid, router in routers.items():
        if isinstance(router, DartRouter):
            out[rid] = (router.table_size(), router.pending_names)
        else:
            out[rid] = (router.table_size(),)
    return out


@dataclass
class MetricsReport:
    scheme: str
    caching: str
    rate: float
    routers: Tuple[str, ...]
    # per-router (post-warmup samples)
    table_size_mean: Dict[str, float] = field(default_factory=dict)
    table_size_max: Dict[str, int] = field(default_factory=dict)
    rct_pending_mean: Dict[str, float] = field(default_factory=dict)
    interests_received: Dict[str, int] = field(default_factory=dict)
    delay_mean_ms: Dict[str, float] = field(default_factory=dict)
    delay_count: Dict[str, int] = field(default_factory=dict)
    # across-router summary of per-router mean table size
    table_size_router_mean: float = 0.0
    table_size_router_std: float = 0.0
    # totals
    requests: int = 0
    delivered: int = 0
    nacked: int = 0
    abandoned: int = 0
    retries: int = 0
    aggregated: int = 0
    loop_nacks: int = 0
    orphan_data: int = 0
    orphan_nack: int = 0
    dart_evicted: int = 0
    pit_expired: int = 0
    store_evictions: int = 0
    nacks_dropped: int = 0
    nacked_by_code: Dict[str, int] = field(default_factory=dict)
    # optional path collection (small scripted runs)
    interest_paths: List[Tuple[str, ...]] = field(default_factory=list)
    data_paths: List[Tuple[str, ...]] = field(default_factory=list)

    def overall_delay_ms(self) -> Optional[float]:
        total = sum(self.delay_count.values())
        if total == 0:
            return None
        return sum(self.delay_mean_ms[r] * self.delay_count[r]
                   for r in self.routers if r in self.delay_mean_ms) / total

    def rows(self) -> List[Tuple[str, str, float, str, str, float]]:
        """Flat rows matching the CSV contract:
        (scheme, caching, rate, router, metric, value)."""
        out = []

        def add(router, metric, value):
            out.append((self.scheme, self.caching, self.rate, router, metric, value))

        for r in self.routers:
            add(r, "table_size_mean", self.table_size_mean.get(r, 0.0))
            add(r, "table_size_max", self.table_size_max.get(r, 0))
            if self.scheme == Scheme.DART.value:
                add(r, "rct_pending_mean", self.rct_pending_mean.get(r, 0.0))
            add(r, "interests_received", self.interests_received.get(r, 0))
            add(r, "delay_count", self.delay_count.get(r, 0))
            if self.delay_count.get(r, 0):
                add(r, "delay_mean_ms", self.delay_mean_ms[r])
        add("*", "table_size_router_mean", self.table_size_router_mean)
        add("*", "table_size_router_std", self.table_size_router_std)
        for metric in ("requests", "delivered", "nacked", "abandoned", "retries",
                       "aggregated", "loop_nacks", "orphan_data", "orphan_nack",
                       "dart_evicted", "pit_expired", "store_evictions",
                       "nacks_dropped"):
            add("*", metric, getattr(self, metric))
        for code in sorted(self.nacked_by_code):
            add("*", f"nacked_{code}", self.nacked_by_code[code])
        overall = self.overall_delay_ms()
        add("*", "delay_count", sum(self.delay_count.values()))
        if overall is not None:
            add("*", "delay_mean_ms", overall)
        return out


class _OpenRequest:
    __slots__ = ("token", "attempt", "issues")

    def __init__(self, token, now):
        self.token = token
        self.attempt = 1
        self.issues = [now]


_MSG_KIND = {Interest: "INT", NdnInterest: "INT", DataPacket: "DATA", Nack: "NACK"}


def _trace_fields(msg) -> str:
    t = type(msg)
    if t is Interest:
        return f"name={_esc_name(msg.name)} h={msg.hop_count if msg.hop_count is not None else '-'} dart={msg.dart if msg.dart is not None else '-'}"
    if t is NdnInterest:
        return f"name={_esc_name(msg.name)} h=- dart={msg.nonce}"
    d = msg.dart if msg.dart is not None else "-"
    return f"name={_esc_name(msg.name)} h=- dart={d}"


class _Simulation:
    def __init__(self, topology: Topology, fibs: Dict[str, Fib], scheme: Scheme,
                 caching_mode: CachingMode, *, workload=None, requests=None,
                 consumers=None, catalog=None, audits=True, trace=None,
                 fib_edits=(), dart_ttl_ms=10_000.0, pit_lifetime_ms=4_000.0,
                 sweep_interval_ms=1_000.0, sample_interval_ms=100.0,
                 warmup_fraction=0.1, retry_timeout_ms=1_000.0, max_tries=3,
                 store_capacity=None, collect_paths=False, duration_ms=None,
                 seed=0):
        if workload is not None and requests is not None:
            raise ValueError("pass either a workload or scripted requests, not both")
        if catalog is None:
            raise ValueError("catalog of content names is required")
        if workload is not None and len(catalog) < workload.catalog_size:
            raise ValueError("catalog smaller than workload.catalog_size")
        self.topology = topology
        self.scheme = scheme
        self.caching_mode = caching_mode
        self.catalog: List[Name] = list(catalog)
        self.collect_paths = collect_paths
        self.max_tries = max_tries
        self.retry_timeout_ms = retry_timeout_ms
        self.sweep_interval_ms = sweep_interval_ms
        self.sample_interval_ms = sample_interval_ms
        self.trace = trace

        if consumers is None:
            consumers = {f"c.{r}": r for r in topology.routers}
        for cid in consumers:
            if cid in topology.neighbors:
                raise ValueError(f"consumer id collides with a router id: {cid}")
        self.consumer_router: Dict[str, str] = dict(consumers)

        anchored: Dict[str, List] = {r: [] for r in topology.routers}
        for prefix, anchors in topology.anchors.items():
            for a in anchors:
                anchored[a].append(prefix)
        self.routers: Dict[str, object] = {}
        for r in topology.routers:
            if scheme is Scheme.DART:
                node = DartRouter(r, fibs[r], tuple(anchored[r]), caching_mode,
                                  dart_ttl_ms=dart_ttl_ms, store_capacity=store_capacity)
            else:
                node = NdnRouter(r, fibs[r], tuple(anchored[r]), caching_mode,
                                 pit_lifetime_ms=pit_lifetime_ms, store_capacity=store_capacity)
                node.local_consumers = {c for c, rr in consumers.items() if rr == r}
            self.routers[r] = node
        for prefix, anchors in topology.anchors.items():
            owned = [n for n in self.catalog if prefix.matches(n)]
            for a in anchors:
                node = self.routers[a]
                for n in owned:
                    node.preload(DataPacket(n))

        workload_seed = workload.seed if workload is not None else seed
        if scheme is Scheme.NDN:
            self._nonce_rng = {r: random.Random(f"nonce:{workload_seed}:{r}")
                               for r in topology.routers}

        # event plumbing
        self.heap: List[tuple] = []
        self._seq = 0
        self.workload_iter = None
        last_request_ms = 0.0
        if workload is not None:
            self.workload_iter = generate_workload(workload, sorted(self.consumer_router))
            self._pull_workload()
        elif requests:
            for (t, consumer, name) in requests:
                if consumer not in self.consumer_router:
                    raise ValueError(f"unknown consumer in script: {consumer}")
                self._push(t, _REQUEST, (consumer, name))
                last_request_ms = max(last_request_ms, t)

        if duration_ms is not None:
            self.horizon_ms = float(duration_ms)
        elif workload is not None:
            self.horizon_ms = workload.duration * 1000.0
        else:
            self.horizon_ms = last_request_ms + 1.0
        self.warmup_ms = self.horizon_ms * warmup_fraction

        if sweep_interval_ms and sweep_interval_ms <= self.horizon_ms:
            self._push(sweep_interval_ms, _SWEEP, None)
        first_sample = self.warmup_ms + sample_interval_ms
        if sample_interval_ms and first_sample <= self.horizon_ms:
            self._push(first_sample, _SAMPLE, None)
        for (t, r, fib) in fib_edits:
            self._push(t, _FIB_EDIT, (r, fib))

        # audit / path plumbing
        self.audit = bool(audits) and scheme is Scheme.DART
        self.thread_chains = self.audit or collect_paths
        self.recent: deque = deque(maxlen=256)

        # metrics accumulators
        rl = self.router_list = list(topology.routers)
        self.rate = workload.per_router_rate if workload is not None else 0.0
        self.interests_received = {r: 0 for r in rl}
        self.size_sum = {r: 0 for r in rl}
        self.size_max = {r: 0 for r in rl}
        self.pending_sum = {r: 0 for r in rl}
        self.sample_count = 0
        self.delay_sum = {r: 0.0 for r in rl}
        self.delay_count = {r: 0 for r in rl}
        self.open: Dict[tuple, _OpenRequest] = {}
        self._next_token = 0
        self.requests = 0
        self.delivered = 0
        self.nacked = 0
        self.abandoned = 0
        self.retries = 0
        self.nacked_by_code: Dict[str, int] = {}
        self.interest_paths: List[Tuple[str, ...]] = []
        self.data_paths: List[Tuple[str, ...]] = []

    # -- plumbing ------------------------------------------------------------

    def _push(self, t: float, kind: int, data):
        self._seq += 1
        heapq.heappush(self.heap, (t, self._seq, kind, data))

    def _pull_workload(self):
        nxt = next(self.workload_iter, None)
        if nxt is not None:
            t, consumer, idx = nxt
            self._push(t, _REQUEST, (consumer, self.catalog[idx]))

    def _tline(self, now, router, d, kind, msg, peer):
        self.trace.write(f"t={now!r} {router} {d} {kind} {_trace_fields(msg)} peer={peer}\n")

    def _recent_lines(self) -> List[str]:
        return [f"t={t!r} {dst} RX {_MSG_KIND[type(m)]} {_trace_fields(m)} peer={src}"
                for (t, src, dst, m) in self.recent]

    # -- consumer side ---------------------------------------------------------

    def _local_ask(self, now: float, consumer: str, name: Name):
        r = self.consumer_router[consumer]
        self.interests_received[r] += 1
        node = self.routers[r]
        if self.scheme is Scheme.DART:
            if self.trace:
                self._tline(now, r, "RX", "INT", Interest(name), consumer)
            ems = node.on_local_interest(consumer, name, now)
        else:
            msg = NdnInterest(name, self._nonce_rng[r].getrandbits(64))
            if self.trace:
                self._tline(now, r, "RX", "INT", msg, consumer)
            ems = node.on_interest(consumer, msg, now)
        self._process_emissions(now, r, ems, None, ())

    def _consumer_receive(self, now: float, consumer: str, msg, data_path):
        key = (consumer, msg.name)
        rec = self.open.get(key)
        if type(msg) is DataPacket:
            if data_path is not None:
                self.data_paths.append(data_path)
            if rec is None:
                return
            warm = self.warmup_ms
            r = self.consumer_router[consumer]
            for t0 in rec.issues:
                self.delivered += 1
                if t0 >= warm:
                    self.delay_sum[r] += now - t0
                    self.delay_count[r] += 1
            del self.open[key]
        else:
            if rec is None:
                return
            n = len(rec.issues)
            self.nacked += n
            code = msg.code.value
            self.nacked_by_code[code] = self.nacked_by_code.get(code, 0) + n
            del self.open[key]

    def _request(self, now: float, consumer: str, name: Name):
        self.requests += 1
        if self.workload_iter is not None:
            self._pull_workload()
        key = (consumer, name)
        rec = self.open.get(key)
        if rec is not None:
            # same consumer re-asks while the first fetch is in flight: ride it
            rec.issues.append(now)
            return
        self._next_token += 1
        self.open[key] = _OpenRequest(self._next_token, now)
        self._local_ask(now, consumer, name)
        if key in self.open and self.retry_timeout_ms:
            self._push(now + self.retry_timeout_ms, _RETRY, (consumer, name, self._next_token))

    def _retry(self, now: float, consumer: str, name: Name, token: int):
        key = (consumer, name)
        rec = self.open.get(key)
        if rec is None or rec.token != token:
            return
        if rec.attempt >= self.max_tries:
            self.abandoned += len(rec.issues)
            del self.open[key]
            return
        rec.attempt += 1
        self.retries += 1
        self._local_ask(now, consumer, name)
        if key in self.open:
            self._push(now + self.retry_timeout_ms, _RETRY, (consumer, name, token))

    # -- network side ----------------------------------------------------------

    def _process_emissions(self, now: float, src: str, ems, in_msg, in_chain):
        """Route a handler's emissions: consumer deliveries happen now (the
        consumer sits on its router); neighbour messages ride the link."""
        consumer_router = self.consumer_router
        thread = self.thread_chains
        terminal_recorded = False
        for dst, m in ems:
            mt = type(m)
            if dst in consumer_router:
                if self.trace:
                    self._tline(now, src, "TX", _MSG_KIND[mt], m, dst)
                data_path = None
                if self.collect_paths and mt is DataPacket:
                    if in_msg is None:
                        # answered straight from the local store
                        self.interest_paths.append((src,))
                        data_path = (src,)
                    elif type(in_msg) is DataPacket:
                        data_path = in_chain + (src,)
                    else:
                        # terminal answer to an interest at its first router
                        self.interest_paths.append(in_chain + (src,))
                        data_path = (src,)
                self._consumer_receive(now, dst, m, data_path)
                continue

            if thread:
                if mt is Interest or mt is NdnInterest:
                    if in_msg is not None and (type(in_msg) is Interest or type(in_msg) is NdnInterest):
                        if self.audit:
                            if src in in_chain:
                                raise AuditError("path-acyclicity", src, m,
                                                 in_chain, self._recent_lines())
                            if mt is Interest and m.hop_count >= in_msg.hop_count:
                                raise AuditError("hop-count-descent", src, m,
                                                 in_chain, self._recent_lines())
                        chain = in_chain + (src,)
                    else:
                        chain = (src,)
                elif mt is DataPacket:
                    if self.collect_paths and in_msg is not None and \
                            (type(in_msg) is Interest or type(in_msg) is NdnInterest) and not terminal_recorded:
                        # interest journey ends here; remember how it came
                        self.interest_paths.append(in_chain + (src,))
                        terminal_recorded = True
                    chain = in_chain + (src,) if (in_msg is not None and type(in_msg) is DataPacket) else (src,)
                else:  # Nack: response path, never audited
                    if self.collect_paths and in_msg is not None and \
                            (type(in_msg) is Interest or type(in_msg) is NdnInterest) and not terminal_recorded:
                        self.interest_paths.append(in_chain + (src,))
                        terminal_recorded = True
                    chain = ()
            else:
                chain = ()
            if self.trace:
                self._tline(now, src, "TX", _MSG_KIND[mt], m, dst)
            self._push(now + self.topology.delay(src, dst), _DELIVER, (dst, src, m, chain))

    def _deliver(self, now: float, dst: str, src: str, msg, chain):
        mt = type(msg)
        node = self.routers[dst]
        if self.audit:
            self.recent.append((now, src, dst, msg))
        if self.trace:
            before = None
            if mt is DataPacket or mt is Nack:
                before = node.orphan_data + node.orphan_nack if self.scheme is Scheme.DART \
                    else node.orphan_data + node.nacks_dropped
        if mt is Interest:
            self.interests_received[dst] += 1
            ems = node.on_neighbor_interest(src, msg, now)
        elif mt is NdnInterest:
            self.interests_received[dst] += 1
            ems = node.on_interest(src, msg, now)
        elif mt is DataPacket:
            ems = node.on_data(src, msg, now)
        else:
            ems = node.on_nack(src, msg, now)
        if self.trace:
            kind = _MSG_KIND[mt]
            if before is not None:
                after = node.orphan_data + node.orphan_nack if self.scheme is Scheme.DART \
                    else node.orphan_data + node.nacks_dropped
                self._tline(now, dst, "DROP" if after > before else "RX", kind, msg, src)
            else:
                self._tline(now, dst, "RX", kind, msg, src)
        if ems:
            self._process_emissions(now, dst, ems, msg, chain)

    # -- timers ------------------------------------------------------------

    def _sweep(self, now: float):
        if self.scheme is Scheme.DART:
            for r in self.router_list:
                self.routers[r].evict_darts(now)
        else:
            for r in self.router_list:
                self.routers[r].expire_pit(now)
        nxt = now + self.sweep_interval_ms
        if nxt <= self.horizon_ms:
            self._push(nxt, _SWEEP, None)

    def _sample(self, now: float):
        sizes = sample_table_sizes(self.routers)
        self.sample_count += 1
        dart = self.scheme is Scheme.DART
        for r in self.router_list:
            n = sizes[r][0]
            self.size_sum[r] += n
            if n > self.size_max[r]:
                self.size_max[r] = n
            if dart:
                self.pending_sum[r] += sizes[r][1]
        nxt = now + self.sample_interval_ms
        if nxt <= self.horizon_ms:
            self._push(nxt, _SAMPLE, None)

    # -- main loop ----------------------------------------------------------

    def run(self) -> MetricsReport:
        heap = self.heap
        pop = heapq.heappop
        while heap:
            now, _, kind, data = pop(heap)
            if kind == _DELIVER:
                self._deliver(now, data[0], data[1], data[2], data[3])
            elif kind == _REQUEST:
                self._request(now, data[0], data[1])
            elif kind == _RETRY:
                self._retry(now, data[0], data[1], data[2])
            elif kind == _SAMPLE:
                self._sample(now)
            elif kind == _SWEEP:
                self._sweep(now)
            else:
                self.routers[data[0]].fib = data[1]
        return self._report()

    def _report(self) -> MetricsReport:
        rep = MetricsReport(self.scheme.value, self.caching_mode.value, self.rate,
                            tuple(self.router_list))
        k = self.sample_count
        means = []
        for r in self.router_list:
            mean = self.size_sum[r] / k if k else 0.0
            rep.table_size_mean[r] = mean
            rep.table_size_max[r] = self.size_max[r]
            means.append(mean)
            if self.scheme is Scheme.DART:
                rep.rct_pending_mean[r] = self.pending_sum[r] / k if k else 0.0
            rep.interests_received[r] = self.interests_received[r]
            rep.delay_count[r] = self.delay_count[r]
            if self.delay_count[r]:
                rep.delay_mean_ms[r] = self.delay_sum[r] / self.delay_count[r]
        mu = sum(means) / len(means)
        rep.table_size_router_mean = mu
        rep.table_size_router_std = math.sqrt(
            max(0.0, sum(m * m for m in means) / len(means) - mu * mu))
        rep.requests = self.requests
        rep.delivered = self.delivered
        rep.nacked = self.nacked
        rep.abandoned = self.abandoned
        rep.retries = self.retries
        rep.nacked_by_code = dict(self.nacked_by_code)
        nodes = [self.routers[r] for r in self.router_list]
        rep.orphan_data = sum(n.orphan_data for n in nodes)
        rep.loop_nacks = sum(n.loop_nacks_sent for n in nodes)
        rep.store_evictions = sum(n.store.evictions for n in nodes)
        if self.scheme is Scheme.DART:
            rep.aggregated = sum(n.aggregated_local for n in nodes)
            rep.orphan_nack = sum(n.orphan_nack for n in nodes)
            rep.dart_evicted = sum(n.evicted_darts for n in nodes)
        else:
            rep.aggregated = sum(n.aggregated for n in nodes)
            rep.pit_expired = sum(n.expired_pit for n in nodes)
            rep.nacks_dropped = sum(n.nacks_dropped for n in nodes)
        if self.collect_paths:
            rep.interest_paths = self.interest_paths
            rep.data_paths = self.data_paths
        return rep


def run(topology: Topology, fibs: Dict[str, Fib], scheme, caching_mode,
        workload: Optional[WorkloadSpec] = None, audits: bool = True,
        *, trace_path: Optional[str] = None, **kwargs) -> MetricsReport:
    """Simulate one cell and return its metrics.

    Exactly one of ``workload`` / ``requests=[(time_ms, consumer, name), ...]``
    drives traffic.  ``catalog`` (the content names that exist; anchors
    preload everything matching their prefixes) is always required.
    """
    if not isinstance(scheme, Scheme):
        scheme = Scheme(scheme)
    if not isinstance(caching_mode, CachingMode):
        caching_mode = CachingMode(caching_mode)
    if trace_path:
        with open(trace_path, "w") as fh:
            sim = _Simulation(topology, fibs, scheme, caching_mode,
                              workload=workload, audits=audits, trace=fh, **kwargs)
            return sim.run()
    sim = _Simulation(topology, fibs, scheme, caching_mode,
                      workload=workload, audits=audits, trace=None, **kwargs)
    return sim.run()
