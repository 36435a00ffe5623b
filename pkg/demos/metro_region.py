"""
A 37-site metro region
======================

A synthetic region shaped like a city core: 35 central offices, 2 core
sites and 2000 base stations. Each plan takes from seconds to about a
minute; the LPs are large enough that they go to HiGHS automatically.
"""

import time

from mecplan import CostModel
from mecplan import experiments as ex
from mecplan.scenario import generate_scenario, preset
from mecplan.topology import min_dc_cover, service_areas

inp = ex.inputs_from_scenario(generate_scenario(preset("paper37", seed=0)), hour=18)
print(inp.g)

# %% how many DCs a 1 ms round trip needs at the very least
budget = 1.0
sam = service_areas(inp.g, budget)
print(f"{sam.coverage_fraction(inp.g.base_stations):.0%} of BSs covered, "
      f"minimum cover {len(min_dc_cover(sam, 'exact'))} DCs")

# %% the two core sites alone, as in a centralized core network
fixed = list(inp.g.core_dcs)
_, _, frac = ex.centralized_capacity(inp, sam, fixed)
print(f"core sites {fixed} reach {frac:.0%} of demand within {budget} ms")

# %% cheap and expensive relocations
inst = ex.make_instance(inp, budget)
for b_sar in (0.0, 1e5):
    t0 = time.perf_counter()
    sol = ex.solve(inp, budget, CostModel(b_sar=b_sar), inst=inst)
    r = ex.sweep_row(b_sar, budget, sol)
    print(f"b_sar {b_sar:g}: {r['n_primary_dcs']} primary / {r['n_secondary_dcs']} secondary DCs, "
          f"total {r['total']:.4g}, SAR {r['total_sar']:.3g} ({time.perf_counter() - t0:.0f} s)")
