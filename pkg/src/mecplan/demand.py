"""Traffic demand, handover graph, cluster partitions and SAR accounting."""

from __future__ import annotations

import csv
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Iterable, Mapping

import networkx as nx
import numpy as np

from .topology import TopologyGraph

HOURS = 24
DEMAND_HEADER = ["bs_id", "hour", "demand_mbps"]
HANDOVER_HEADER = ["src_bs", "dst_bs", "hour", "ho_per_hour"]


class DemandError(ValueError):
    pass


def _check_hour(hour: int) -> None:
    if not 0 <= hour < HOURS:
        raise DemandError(f"hour must be in 0..23, got {hour}")


@dataclass
class DemandProfile:
    """Hourly demand per BS, in Mbps."""

    mbps: dict[str, np.ndarray] = field(default_factory=dict)

    @classmethod
    def from_rows(cls, rows: Iterable[tuple[str, int, float]]) -> "DemandProfile":
        out: dict[str, np.ndarray] = {}
        for bs, hour, value in rows:
            hour = int(hour)
            _check_hour(hour)
            value = float(value)
            if value < 0:
                raise DemandError(f"negative demand for {bs!r} at hour {hour}")
            out.setdefault(str(bs), np.zeros(HOURS))[hour] += value
        return cls(dict(sorted(out.items())))

    def at(self, bs: str, hour: int) -> float:
        arr = self.mbps.get(bs)
        return 0.0 if arr is None else float(arr[hour])

    def hour_slice(self, hour: int) -> dict[str, float]:
        _check_hour(hour)
        return {bs: float(arr[hour]) for bs, arr in self.mbps.items()}

    def rows(self) -> list[tuple[str, int, float]]:
        return [(bs, h, float(arr[h])) for bs, arr in self.mbps.items() for h in range(HOURS) if arr[h] != 0]


def read_demand_csv(path) -> DemandProfile:
    return DemandProfile.from_rows(_read_csv(path, DEMAND_HEADER, (str, int, float)))


def write_demand_csv(profile: DemandProfile, path) -> None:
    _write_csv(path, DEMAND_HEADER, profile.rows())


def read_handover_csv(path) -> list[tuple[str, str, int, float]]:
    return _read_csv(path, HANDOVER_HEADER, (str, str, int, float))


def write_handover_csv(rows, path) -> None:
    _write_csv(path, HANDOVER_HEADER, rows)


def _read_csv(path, header, types) -> list[tuple]:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        first = next(reader, None)
        if first != header:
            raise DemandError(f"{path}: expected header {','.join(header)}, got {first}")
        out = []
        for lineno, row in enumerate(reader, start=2):
            if len(row) != len(header):
                raise DemandError(f"{path}:{lineno}: expected {len(header)} fields")
            try:
                out.append(tuple(t(v) for t, v in zip(types, row)))
            except ValueError as exc:
                raise DemandError(f"{path}:{lineno}: {exc}") from None
        return out


def _write_csv(path, header, rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([repr(v) if isinstance(v, float) else v for v in row])


def aggregate_demand(profile: DemandProfile, g: TopologyGraph, hour: int) -> dict[str, float]:
    """Sum BS demand onto the leaf DC each BS is homed on (h_l)."""
    _check_hour(hour)
    out = {leaf: 0.0 for leaf in g.leaf_dcs}
    for bs, arr in profile.mbps.items():
        if bs not in g.nodes or g.nodes[bs].kind != "base_station":
            raise DemandError(f"BS {bs!r} in demand profile is absent from topology")
        out[g.leaf_of(bs)] += float(arr[hour])
    return out


class HandoverGraph:
    """Directed handover rates between BSs for one hour, plus backhaul edges.

    ``cut_graph`` is the undirected graph fed to the multiway cut: BS pairs
    carry the symmetrized rate, backhaul edges a uniform weight larger than all
    handover weight combined.
    """

    def __init__(self, g: TopologyGraph, rates: Mapping[tuple[str, str], float], hour: int):
        self.topology = g
        self.hour = hour
        self.rates: dict[tuple[str, str], float] = dict(sorted(rates.items()))
        nbrs: dict[str, set[str]] = defaultdict(set)
        for i, j in self.rates:
            nbrs[i].add(j)
            nbrs[j].add(i)
        self.neighbors = {i: frozenset(s) for i, s in sorted(nbrs.items())}
        self.total_rate = float(sum(self.rates.values()))
        self.backhaul_weight = 10.0 * (self.total_rate + 1.0)

    def rate(self, i: str, j: str) -> float:
        return self.rates.get((i, j), 0.0)

    def pair_weight(self, i: str, j: str) -> float:
        """Undirected cut weight between two BSs (both directions)."""
        return self.rate(i, j) + self.rate(j, i)

    def cut_graph(self) -> nx.Graph:
        g = self.topology
        h = nx.Graph()
        h.add_nodes_from(g.leaf_dcs)
        h.add_nodes_from(g.base_stations)
        for bs in g.base_stations:
            h.add_edge(bs, g.leaf_of(bs), weight=self.backhaul_weight)
        for (i, j), lam in self.rates.items():
            if h.has_edge(i, j):
                h.edges[i, j]["weight"] += lam
            else:
                h.add_edge(i, j, weight=lam)
        return h

    def leaf_matrix(self, leaves: list[str]) -> np.ndarray:
        """Handover volume between leaf DCs, ``M[a, b] = sum of rates from BS(a) to BS(b)``."""
        idx = {l: k for k, l in enumerate(leaves)}
        m = np.zeros((len(leaves), len(leaves)))
        for (i, j), lam in self.rates.items():
            m[idx[self.topology.leaf_of(i)], idx[self.topology.leaf_of(j)]] += lam
        return m


def build_handover_graph(g: TopologyGraph, ho_records: Iterable[tuple], hour: int) -> HandoverGraph:
    """Collect the handover records of one hour; records are ``(src, dst, hour, rate)``."""
    _check_hour(hour)
    rates: dict[tuple[str, str], float] = defaultdict(float)
    bss = set(g.base_stations)
    for src, dst, h, lam in ho_records:
        for bs in (src, dst):
            if bs not in bss:
                raise DemandError(f"unknown BS id {bs!r} in handover records")
        if lam < 0:
            raise DemandError(f"negative rate {lam} for {src}->{dst}")
        if src == dst:
            raise DemandError(f"self-handover on {src!r}")
        if int(h) == hour:
            rates[(src, dst)] += float(lam)
    return HandoverGraph(g, rates, hour)


@dataclass(frozen=True)
class Cluster:
    serving_dc: str
    leaves: frozenset[str]
    base_stations: frozenset[str]


@dataclass(frozen=True)
class Partition:
    """Disjoint clusters of leaves/BSs, each served by one DC."""

    clusters: tuple[Cluster, ...]

    def __post_init__(self):
        seen: set[str] = set()
        dcs: set[str] = set()
        for c in self.clusters:
            if c.serving_dc in dcs:
                raise ValueError(f"DC {c.serving_dc!r} serves two clusters")
            dcs.add(c.serving_dc)
            members = c.leaves | c.base_stations
            if members & seen:
                raise ValueError(f"clusters overlap on {sorted(members & seen)}")
            seen |= members

    @classmethod
    def from_assignment(cls, g: TopologyGraph, assignment: Mapping[str, str]) -> "Partition":
        """Group leaves by serving DC; BSs follow the leaf they are homed on."""
        groups: dict[str, list[str]] = defaultdict(list)
        for leaf, dc in assignment.items():
            groups[dc].append(leaf)
        clusters = []
        for dc in sorted(groups):
            leaves = frozenset(groups[dc])
            bss = frozenset(b for l in leaves for b in g.base_stations_of(l))
            clusters.append(Cluster(dc, leaves, bss))
        return cls(tuple(clusters))

    @property
    def assignment(self) -> dict[str, str]:
        return {l: c.serving_dc for c in self.clusters for l in sorted(c.leaves)}

    @property
    def serving_dcs(self) -> list[str]:
        return [c.serving_dc for c in self.clusters]

    def cluster_index(self) -> dict[str, int]:
        return {n: k for k, c in enumerate(self.clusters) for n in c.leaves | c.base_stations}

    def check_feasible(self, sam) -> list[str]:
        """Leaves whose serving DC is outside their service area."""
        return sorted(l for c in self.clusters for l in c.leaves if c.serving_dc not in sam.dc_of.get(l, ()))


@dataclass(frozen=True)
class SarResult:
    dcs: tuple[str, ...]
    matrix: np.ndarray
    pair_sar: dict[tuple[str, str], float]
    total: float

    def between(self, v: str, u: str) -> float:
        """SAR volume in both directions between the clusters served by v and u."""
        a, b = self.dcs.index(v), self.dcs.index(u)
        return float(self.matrix[a, b] + self.matrix[b, a])


def inter_cluster_sar(p: Partition, h: HandoverGraph) -> SarResult:
    """Service-area relocations: handovers whose endpoints sit in different clusters."""
    where = p.cluster_index()
    k = len(p.clusters)
    m = np.zeros((k, k))
    pair: dict[tuple[str, str], float] = {}
    for (i, j), lam in h.rates.items():
        if i not in where or j not in where:
            raise ValueError(f"partition does not cover BS {i if i not in where else j!r}")
        a, b = where[i], where[j]
        if a != b:
            pair[(i, j)] = lam
            m[a, b] += lam
        else:
            pair[(i, j)] = 0.0
    return SarResult(tuple(p.serving_dcs), m, pair, float(m.sum()))
