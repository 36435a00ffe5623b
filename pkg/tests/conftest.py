import pytest

from mecplan.experiments import inputs_from_scenario
from mecplan.scenario import generate_scenario, preset
from mecplan.topology import BASE_STATION, CORE_DC, LEAF_DC, build_topology

KIND = {"B": BASE_STATION, "L": LEAF_DC, "C": CORE_DC}


def raw_topology(nodes, links):
    """Compact topology literal: nodes as ``(id, x, y)`` with the kind taken from
    the id's first letter; links as ``(a, b, km)`` or ``(a, b, km, latency_us)``."""
    out_nodes = [{"id": n, "kind": KIND[n[0]], "x_km": float(x), "y_km": float(y)} for n, x, y in nodes]
    out_links = []
    for lk in links:
        d = {"a": lk[0], "b": lk[1], "distance_km": float(lk[2])}
        if len(lk) > 3:
            d["latency_us"] = float(lk[3])
        out_links.append(d)
    return {"nodes": out_nodes, "links": out_links}


def make_topology(nodes, links, **kw):
    return build_topology(raw_topology(nodes, links), **kw)


def desk_three_dc(with_c=True, dist=0.0):
    """Leaves A and B (one BS each) plus an optional core C, all joined by ``dist`` km links."""
    nodes = [("BA", 0, 0), ("BB", 1, 0), ("LA", 0, 0), ("LB", 1, 0)]
    links = [("BA", "LA", 0.0), ("BB", "LB", 0.0), ("LA", "LB", dist)]
    if with_c:
        nodes.append(("C", 0.5, 0))
        links += [("LA", "C", dist), ("LB", "C", dist)]
    return make_topology(nodes, links)


@pytest.fixture(scope="session")
def tiny_inputs():
    return inputs_from_scenario(generate_scenario(preset("tiny", seed=0)), 18)
