"""
How the SAR price reshapes a metro edge cloud
=============================================

Raise the price of a service-area relocation from 0 to 10^5 on a small
synthetic metro region and watch the planner trade DC and link cost for
fewer, larger clusters.
"""

from mecplan import CostModel
from mecplan import experiments as ex
from mecplan.scenario import generate_scenario, preset

# %% a four-leaf region with one core site, peak hour
inp = ex.inputs_from_scenario(generate_scenario(preset("tiny", seed=0)), hour=18)
print(inp.g)

# %% sweep a loose and a tight RTT budget across the default price grid
for budget in (10.0, 0.7):
    inst = ex.make_instance(inp, budget)
    print(f"\nRTT budget {budget} ms")
    print(f"{'b_sar':>8} {'link':>10} {'dc':>10} {'sar':>10} {'total':>10} {'DCs':>4} {'SAR':>8}")
    for b_sar in ex.DEFAULT_B_SAR_GRID:
        sol = ex.solve(inp, budget, CostModel(b_sar=b_sar), inst=inst)
        r = ex.sweep_row(b_sar, budget, sol)
        print(f"{b_sar:>8g} {r['link_cost']:>10.1f} {r['dc_cost']:>10.1f} {r['sar_cost']:>10.1f} "
              f"{r['total']:>10.1f} {r['n_primary_dcs']:>4} {r['total_sar']:>8.2f}")

# %% at zero price every leaf serves itself; at the top of the grid one DC
# serves everybody (when the budget allows it) and relocations vanish
