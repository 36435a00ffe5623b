"""
The fewest DCs a tight budget allows
====================================

Four distant groups of leaves: under a 0.8 ms budget no DC reaches across
groups, so at least four DCs must serve, however expensive relocations get.
"""

from mecplan import CostModel
from mecplan import experiments as ex
from mecplan.scenario import GROUPED_BUDGET_MS, grouped_scenario
from mecplan.topology import min_dc_cover, service_areas

inp = ex.inputs_from_scenario(grouped_scenario(n_groups=4), hour=18)
sam = service_areas(inp.g, GROUPED_BUDGET_MS)
print("smallest covering DC set:", sorted(min_dc_cover(sam, "exact")))

# %% the greedy planner never drops below it
inst = ex.make_instance(inp, GROUPED_BUDGET_MS)
for b_sar in ex.DEFAULT_B_SAR_GRID:
    sol = ex.solve(inp, GROUPED_BUDGET_MS, CostModel(b_sar=b_sar), inst=inst)
    print(f"b_sar {b_sar:>8g}: serving DCs {' '.join(sol.plan.serving_dcs)}")
