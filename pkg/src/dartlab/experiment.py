"""Experiment harness: flat-file configs, grid runs, CSVs, comparisons.

A config describes one desk-scale study: a random geometric topology, a
set of producer routers anchoring slices of a Zipf-ranked catalog, and a
cross-product of (scheme, caching, rate, seed) cells.  Each cell simulates
independently and lands in its own CSV; a manifest records everything
needed to regenerate any of them bit-for-bit.
"""

from __future__ import annotations

import csv
import hashlib
import json
import os
import random
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, fields, replace
from pathlib import Path
from typing import Dict, List, Optional, Tuple

from . import __version__
from .engine import WorkloadSpec, run
from .model import Name, Prefix
from .routing import Topology, compute_fibs, generate_topology


class ConfigError(Exception):
    pass


@dataclass(frozen=True)
class ExperimentConfig:
    nodes: int = 50
    area: float = 80.0
    radius: float = 17.0
    link_delay_ms: float = 230.0
    topology_seed: int = 1
    producers: int = 4            # 0 = every router anchors a prefix
    schemes: Tuple[str, ...] = ("dart", "ndn")
    caching: Tuple[str, ...] = ("edge", "onpath")
    rates: Tuple[float, ...] = (10.0, 50.0, 100.0, 200.0)
    seeds: Tuple[int, ...] = (1, 2, 3)
    zipf_alpha: float = 1.2
    catalog: int = 10_000
    duration_s: float = 60.0
    dart_ttl_s: float = 10.0
    # Lifetimes sized so nothing times out on the longest anchor round trip
    # (12 hops each way at the default delay); expiry then signals real loss.
    pit_lifetime_s: float = 8.0
    retry_timeout_s: float = 10.0
    max_tries: int = 3
    warmup_frac: float = 0.1
    sample_interval_ms: float = 100.0
    sweep_interval_s: float = 1.0
    audit: bool = True
    store_capacity: int = 0       # 0 = unbounded
    workers: int = 1

    def cells(self) -> List[Tuple[str, str, float, int]]:
        return [(sch, ca, rate, seed)
                for sch in self.schemes for ca in self.caching
                for rate in self.rates for seed in self.seeds]


_LIST_FIELDS = {"schemes", "caching", "rates", "seeds"}
_BOOL_FIELDS = {"audit"}


def parse_config(text: str) -> ExperimentConfig:
    types = {f.name: f.type for f in fields(ExperimentConfig)}
    base = ExperimentConfig()
    values = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, eq, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if not eq or not value:
            raise ConfigError(f"line {lineno}: expected key = value, got {raw!r}")
        if key not in types:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        try:
            if key in _LIST_FIELDS:
                items = [v.strip() for v in value.split(",") if v.strip()]
                if key == "rates":
                    values[key] = tuple(float(v) for v in items)
                elif key == "seeds":
                    values[key] = tuple(int(v) for v in items)
                else:
                    values[key] = tuple(items)
            elif key in _BOOL_FIELDS:
                if value not in ("on", "off", "true", "false"):
                    raise ValueError("expected on/off")
                values[key] = value in ("on", "true")
            else:
                values[key] = type(getattr(base, key))(value)
        except ValueError as e:
            raise ConfigError(f"line {lineno}: bad value for {key}: {e}") from None
    cfg = replace(base, **values)
    for sch in cfg.schemes:
        if sch not in ("dart", "ndn"):
            raise ConfigError(f"unknown scheme {sch!r}")
    for ca in cfg.caching:
        if ca not in ("edge", "onpath", "none"):
            raise ConfigError(f"unknown caching mode {ca!r}")
    return cfg


def load_config(path) -> ExperimentConfig:
    return parse_config(Path(path).read_text())


def build_topology(cfg: ExperimentConfig) -> Topology:
    topo = generate_topology(cfg.nodes, cfg.area, cfg.radius, cfg.link_delay_ms,
                             seed=cfg.topology_seed)
    count = cfg.producers or cfg.nodes
    if count > cfg.nodes:
        raise ConfigError(f"producers={count} exceeds nodes={cfg.nodes}")
    rng = random.Random(f"producers:{cfg.topology_seed}")
    chosen = sorted(rng.sample(sorted(topo.routers), count))
    anchors = {Prefix((f"p{i:02d}",)): (r,) for i, r in enumerate(chosen)}
    return topo.with_anchors(anchors)


def build_catalog(cfg: ExperimentConfig, topology: Topology) -> List[Name]:
    """Popularity rank k maps to producer prefix k mod P, so hot objects are
    spread across producers instead of piling onto one anchor."""
    prefixes = sorted(topology.anchors)
    return [Name((*prefixes[k % len(prefixes)].components, f"o{k:05d}"))
            for k in range(cfg.catalog)]


def cell_filename(scheme: str, caching: str, rate: float, seed: int) -> str:
    r = int(rate) if float(rate).is_integer() else rate
    return f"metrics_{scheme}_{caching}_r{r}_s{seed}.csv"


CSV_HEADER = ("scheme", "caching", "rate", "router", "metric", "value")


def _fmt(v) -> str:
    return repr(v) if isinstance(v, float) else str(v)


def write_rows(path: Path, rows) -> None:
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(CSV_HEADER)
        for (scheme, caching, rate, router, metric, value) in rows:
            w.writerow((scheme, caching, _fmt(rate), router, metric, _fmt(value)))
    os.replace(tmp, path)


def run_cell(cfg: ExperimentConfig, scheme: str, caching: str, rate: float,
             seed: int, out_dir, trace_path: Optional[str] = None) -> str:
    topo = build_topology(cfg)
    fibs = compute_fibs(topo)
    catalog = build_catalog(cfg, topo)
    wl = WorkloadSpec(cfg.zipf_alpha, cfg.catalog, rate, cfg.duration_s, seed)
    rep = run(topo, fibs, scheme, caching, workload=wl, audits=cfg.audit,
              catalog=catalog, trace_path=trace_path,
              dart_ttl_ms=cfg.dart_ttl_s * 1000.0,
              pit_lifetime_ms=cfg.pit_lifetime_s * 1000.0,
              retry_timeout_ms=cfg.retry_timeout_s * 1000.0,
              max_tries=cfg.max_tries, warmup_fraction=cfg.warmup_frac,
              sample_interval_ms=cfg.sample_interval_ms,
              sweep_interval_ms=cfg.sweep_interval_s * 1000.0,
              store_capacity=cfg.store_capacity or None)
    name = cell_filename(scheme, caching, rate, seed)
    write_rows(Path(out_dir) / name, rep.rows())
    return name


def _cell_task(args):
    return run_cell(*args)


def run_experiment(cfg: ExperimentConfig, out_dir, config_text: str = "",
                   trace_template: Optional[str] = None) -> List[str]:
    """Run every cell in the config's cross-product; returns CSV names."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    cells = cfg.cells()
    tasks = []
    for (scheme, caching, rate, seed) in cells:
        trace = None
        if trace_template:
            trace = f"{trace_template}.{scheme}_{caching}_r{rate:g}_s{seed}"
        tasks.append((cfg, scheme, caching, rate, seed, str(out), trace))
    if cfg.workers > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            names = list(pool.map(_cell_task, tasks))
    else:
        names = [run_cell(*t) for t in tasks]

    manifest = {
        "code_version": __version__,
        "config": config_text,
        "config_sha256": hashlib.sha256(config_text.encode()).hexdigest(),
        "parameters": {f.name: getattr(cfg, f.name) for f in fields(cfg)},
        "cells": sorted(names),
    }
    tmp = out / "manifest.json.tmp"
    tmp.write_text(json.dumps(manifest, indent=2, sort_keys=True, default=list) + "\n")
    os.replace(tmp, out / "manifest.json")
    return sorted(names)


# --- comparison ----------------------------------------------------------------

def _read_cell(path: Path) -> Dict:
    per_router_sizes = []
    interests = 0
    delay_mean = None
    delay_count = 0
    totals = {}
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != list(CSV_HEADER):
            raise ConfigError(f"{path.name}: unexpected CSV header {reader.fieldnames}")
        for row in reader:
            metric, router = row["metric"], row["router"]
            value = float(row["value"])
            if router == "*":
                totals[metric] = value
                if metric == "delay_mean_ms":
                    delay_mean = value
                elif metric == "delay_count":
                    delay_count = int(value)
            else:
                if metric == "table_size_mean":
                    per_router_sizes.append(value)
                elif metric == "interests_received":
                    interests += int(value)
    if not per_router_sizes:
        raise ConfigError(f"{path.name}: no per-router table size rows")
    return {
        "table_size_mean": sum(per_router_sizes) / len(per_router_sizes),
        "interests": interests,
        "delay_mean_ms": delay_mean,
        "delay_count": delay_count,
        "totals": totals,
    }


def compare_dir(dir_path, flatness_threshold: float = 2.0):
    """Cross-scheme summary per (caching, rate): mean state size, interest
    counts, delays, and the DART-stays-flat check across rates.

    Returns (lines, summary).  Missing counterpart cells are reported in
    summary["errors"] — never silently dropped.
    """
    d = Path(dir_path)
    cells = {}
    for p in sorted(d.glob("metrics_*.csv")):
        stem = p.stem[len("metrics_"):]
        try:
            scheme, caching, r_part, s_part = stem.rsplit("_", 3)
            rate = float(r_part.lstrip("r"))
            seed = int(s_part.lstrip("s"))
        except ValueError:
            raise ConfigError(f"unrecognised metrics file name: {p.name}")
        cells[(scheme, caching, rate, seed)] = _read_cell(p)
    if not cells:
        raise ConfigError(f"no metrics_*.csv files in {d}")

    errors = []
    keys = sorted({(ca, rate, seed) for (_, ca, rate, seed) in cells})
    for (ca, rate, seed) in keys:
        for scheme in ("dart", "ndn"):
            if (scheme, ca, rate, seed) not in cells:
                errors.append(f"missing {cell_filename(scheme, ca, rate, seed)}")

    groups = {}
    for (scheme, ca, rate, seed), data in cells.items():
        groups.setdefault((ca, rate), {}).setdefault(scheme, []).append(data)

    lines = [f"{'caching':8} {'rate':>6}  {'dart state':>10} {'ndn state':>10} "
             f"{'ndn/dart':>8}  {'dart ints':>10} {'ndn ints':>10}  "
             f"{'dart ms':>8} {'ndn ms':>8}"]
    summary = {"groups": {}, "errors": errors, "flatness": {}}

    def mean(xs):
        xs = [x for x in xs if x is not None]
        return sum(xs) / len(xs) if xs else None

    for (ca, rate) in sorted(groups):
        g = groups[(ca, rate)]
        row = {}
        for scheme in ("dart", "ndn"):
            runs = g.get(scheme, [])
            row[f"{scheme}_state"] = mean([r["table_size_mean"] for r in runs])
            row[f"{scheme}_interests"] = mean([r["interests"] for r in runs])
            row[f"{scheme}_delay_ms"] = mean([r["delay_mean_ms"] for r in runs])
        if row["dart_state"] and row["ndn_state"] is not None:
            row["state_ratio"] = row["ndn_state"] / row["dart_state"]
        else:
            row["state_ratio"] = None
        summary["groups"][(ca, rate)] = row

        def f(v, spec="{:.2f}"):
            return "-" if v is None else spec.format(v)

        lines.append(f"{ca:8} {rate:>6g}  {f(row['dart_state']):>10} "
                     f"{f(row['ndn_state']):>10} {f(row['state_ratio']):>8}  "
                     f"{f(row['dart_interests'], '{:.0f}'):>10} "
                     f"{f(row['ndn_interests'], '{:.0f}'):>10}  "
                     f"{f(row['dart_delay_ms']):>8} {f(row['ndn_delay_ms']):>8}")

    for ca in sorted({ca for (ca, _) in groups}):
        darts = [summary["groups"][(c, r)]["dart_state"]
                 for (c, r) in summary["groups"] if c == ca]
        darts = [v for v in darts if v is not None]
        if len(darts) < 2:
            summary["flatness"][ca] = None
            lines.append(f"flatness[{ca}]: insufficient data (single rate)")
        else:
            spread = max(darts) / min(darts) if min(darts) > 0 else float("inf")
            flat = spread <= flatness_threshold
            summary["flatness"][ca] = spread
            lines.append(f"flatness[{ca}]: dart state max/min across rates = "
                         f"{spread:.2f} ({'flat' if flat else 'NOT flat'} at "
                         f"threshold {flatness_threshold:g})")
    for e in errors:
        lines.append(f"error: {e}")
    return lines, summary


def write_comparison_csv(dir_path, summary) -> Path:
    """Tidy (caching, rate, metric, value) rows — one file gnuplot can plot
    straight from ``using`` column selections."""
    out = Path(dir_path) / "comparison.csv"
    tmp = out.with_name(out.name + ".tmp")
    with open(tmp, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(("caching", "rate", "metric", "value"))
        for (ca, rate) in sorted(summary["groups"]):
            row = summary["groups"][(ca, rate)]
            for metric in sorted(row):
                if row[metric] is not None:
                    w.writerow((ca, _fmt(rate), metric, _fmt(row[metric])))
    os.replace(tmp, out)
    return out
