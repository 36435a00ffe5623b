"""Isolating-cut approximation of the minimum multiway (K-terminal) cut."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Hashable, Iterable

import networkx as nx

from .demand import Cluster, HandoverGraph, Partition
from .topology import BASE_STATION, LEAF_DC, TopologyGraph

FLOW_EPS = 1e-12
_SUPER_SINK = ("__super_sink__",)


class CutError(ValueError):
    pass


def _sort_key(n):
    return (type(n).__name__, str(n))


def max_flow_min_cut(g: nx.Graph, source: Hashable, sink: Hashable, weight: str = "weight") -> tuple[float, frozenset]:
    """Max flow on an undirected weighted graph (Dinic's algorithm).

    Returns the flow value and the source side of a minimum cut, namely the
    nodes reachable from ``source`` in the final residual graph. This is the
    unique inclusion-minimal source side.
    """
    if source == sink:
        raise CutError("source and sink must differ")
    for n in (source, sink):
        if n not in g:
            raise CutError(f"node {n!r} not in graph")

    order = sorted(g.nodes, key=_sort_key)
    idx = {n: k for k, n in enumerate(order)}
    n = len(order)
    head: list[int] = []
    cap: list[float] = []
    adj: list[list[int]] = [[] for _ in range(n)]
    edges = sorted(
        ((idx[a], idx[b], float(d.get(weight, 1.0))) for a, b, d in g.edges(data=True)),
        key=lambda e: (min(e[0], e[1]), max(e[0], e[1])),
    )
    for a, b, w in edges:
        if w < 0:
            raise CutError("negative edge weight")
        if a == b:
            continue
        # undirected edge as a pair of arcs that are each other's residual
        adj[a].append(len(head)); head.append(b); cap.append(w)
        adj[b].append(len(head)); head.append(a); cap.append(w)

    eps = FLOW_EPS * max([1.0] + cap)
    s, t = idx[source], idx[sink]
    total = 0.0
    while True:
        level = [-1] * n
        level[s] = 0
        q = deque([s])
        while q:
            u = q.popleft()
            for e in adj[u]:
                if cap[e] > eps and level[head[e]] < 0:
                    level[head[e]] = level[u] + 1
                    q.append(head[e])
        if level[t] < 0:
            break
        it = [0] * n
        path: list[int] = []
        u = s
        while True:
            if u == t:
                f = min(cap[e] for e in path)
                for e in path:
                    cap[e] -= f
                    cap[e ^ 1] += f
                total += f
                path.clear()
                u = s
                continue
            while it[u] < len(adj[u]):
                e = adj[u][it[u]]
                if cap[e] > eps and level[head[e]] == level[u] + 1:
                    break
                it[u] += 1
            if it[u] < len(adj[u]):
                e = adj[u][it[u]]
                path.append(e)
                u = head[e]
                continue
            # dead end: retreat
            if u == s:
                break
            level[u] = -1
            e = path.pop()
            u = head[e ^ 1]
            it[u] += 1

    seen = {s}
    q = deque([s])
    while q:
        u = q.popleft()
        for e in adj[u]:
            if cap[e] > eps and head[e] not in seen:
                seen.add(head[e])
                q.append(head[e])
    return total, frozenset(order[k] for k in seen)


def cut_value(g: nx.Graph, side: Iterable, weight: str = "weight") -> float:
    side = set(side)
    return float(sum(d.get(weight, 1.0) for a, b, d in g.edges(data=True) if (a in side) != (b in side)))


def crossing_weight(g: nx.Graph, region_of: dict, weight: str = "weight") -> float:
    """Total weight of edges whose endpoints lie in different regions."""
    return float(sum(d.get(weight, 1.0) for a, b, d in g.edges(data=True) if region_of[a] != region_of[b]))


@dataclass
class CutResult:
    """Regions produced by a multiway cut.

    ``regions`` maps each terminal to its node set. Components left without a
    terminal are listed in ``orphans`` until :func:`repair_partition` runs.
    """

    regions: dict[Hashable, frozenset]
    cut_weight: float
    isolating_weights: dict[Hashable, float] = field(default_factory=dict)
    orphans: tuple[frozenset, ...] = ()

    @property
    def k(self) -> int:
        return len(self.regions)

    def region_of(self) -> dict:
        out = {n: t for t, nodes in self.regions.items() for n in nodes}
        for k, comp in enumerate(self.orphans):
            for n in comp:
                out[n] = ("__orphan__", k)
        return out

    def to_partition(self, g: TopologyGraph) -> Partition:
        """Convert to a :class:`Partition` served by each terminal leaf DC."""
        if self.orphans:
            raise CutError("cut result still has terminal-free components; run repair_partition")
        clusters = []
        for term in sorted(self.regions, key=_sort_key):
            nodes = self.regions[term]
            leaves = frozenset(n for n in nodes if g.nodes[n].kind == LEAF_DC)
            bss = frozenset(n for n in nodes if g.nodes[n].kind == BASE_STATION)
            for bs in bss:
                if g.leaf_of(bs) not in leaves:
                    raise CutError(f"BS {bs!r} was separated from its leaf DC")
            clusters.append(Cluster(term, leaves, bss))
        return Partition(tuple(clusters))


def _as_graph(h) -> nx.Graph:
    return h.cut_graph() if isinstance(h, HandoverGraph) else h


def isolating_kcut(h, terminals: Iterable[Hashable], weight: str = "weight") -> CutResult:
    """Union of the K-1 cheapest isolating cuts; within 2 - 2/K of the optimum.

    For each terminal, all other terminals are contracted into a super-sink and
    a minimum cut separates the terminal from it. The most expensive isolating
    cut is discarded; removing the rest leaves every terminal in its own
    connected component.
    """
    g = _as_graph(h)
    terms = sorted(set(terminals), key=_sort_key)
    if len(terms) < 2:
        raise CutError("need at least two terminals")
    for t in terms:
        if t not in g:
            raise CutError(f"terminal {t!r} not in graph")

    sides: dict = {}
    weights: dict = {}
    for t in terms:
        others = set(terms) - {t}
        aux = nx.Graph()
        aux.add_nodes_from(n for n in g if n not in others)
        aux.add_node(_SUPER_SINK)
        for a, b, d in g.edges(data=True):
            a2 = _SUPER_SINK if a in others else a
            b2 = _SUPER_SINK if b in others else b
            if a2 == b2:
                continue
            w = float(d.get(weight, 1.0))
            if aux.has_edge(a2, b2):
                aux.edges[a2, b2][weight] += w
            else:
                aux.add_edge(a2, b2, **{weight: w})
        value, side = max_flow_min_cut(aux, t, _SUPER_SINK, weight)
        sides[t] = side
        weights[t] = value

    dropped = max(terms, key=lambda t: (weights[t], _sort_key(t)))
    removed = set()
    for t in terms:
        if t == dropped:
            continue
        for a, b in g.edges:
            if (a in sides[t]) != (b in sides[t]):
                removed.add(frozenset((a, b)))
    residual = nx.Graph()
    residual.add_nodes_from(g)
    residual.add_edges_from((a, b) for a, b in g.edges if frozenset((a, b)) not in removed)

    regions = {}
    orphans = []
    for comp in sorted((frozenset(c) for c in nx.connected_components(residual)), key=lambda c: min(map(_sort_key, c))):
        inside = [t for t in terms if t in comp]
        if len(inside) > 1:
            raise CutError("terminals left connected")  # cannot happen for exact isolating cuts
        if inside:
            regions[inside[0]] = comp
        else:
            orphans.append(comp)
    res = CutResult(regions, 0.0, weights, tuple(orphans))
    res.cut_weight = crossing_weight(g, res.region_of(), weight)
    return res


def repair_partition(c: CutResult, h, weight: str = "weight") -> CutResult:
    """Fold every terminal-free component into its most strongly connected region."""
    g = _as_graph(h)
    regions = {t: set(nodes) for t, nodes in c.regions.items()}
    pending = list(c.orphans)
    while pending:
        owner = {n: t for t, nodes in regions.items() for n in nodes}
        still = []
        for comp in pending:
            pull: dict = {}
            for a in comp:
                for b, d in g[a].items():
                    if b in owner:
                        pull[owner[b]] = pull.get(owner[b], 0.0) + float(d.get(weight, 1.0))
            if pull:
                best = max(sorted(pull, key=_sort_key), key=lambda t: pull[t])
                regions[best] |= comp
                owner.update((n, best) for n in comp)
            else:
                still.append(comp)
        if len(still) == len(pending):
            raise CutError("component with no neighboring cluster (disconnected input)")
        pending = still
    out = CutResult({t: frozenset(n) for t, n in regions.items()}, 0.0, dict(c.isolating_weights), ())
    out.cut_weight = crossing_weight(g, out.region_of(), weight)
    return out
