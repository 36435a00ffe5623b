"""
Shared spare capacity against 1+1 redundancy
============================================

K identical leaf DCs that can all reach each other only need to hold
1/(K-1) of their demand as spare, because a single failure never hits
two of them at once. Classic 1+1 duplicates everything.
"""

from mecplan import experiments as ex
from mecplan.provisioner import CostModel, ProvisionOptions, provision
from mecplan.scenario import ring_scenario
from mecplan.topology import service_areas

# %% the spare each leaf keeps, as a fraction of total demand
for k in range(2, 7):
    inp = ex.inputs_from_scenario(ring_scenario(k), hour=18)
    sam = service_areas(inp.g, 10.0)
    local = {l: l for l in inp.g.leaf_dcs}
    plan, costs = provision(inp.g, sam, local, inp.leaf_demand, inp.ho, CostModel(b_link=0.0), ProvisionOptions())
    total = sum(inp.leaf_demand.values())
    spare = sum(plan.spare_dc.values())
    print(f"K={k}: spare {spare:7.1f} Mbps for {total:6.1f} Mbps of demand -> {spare / total:.3f} of the 1+1 spare")

# %% the same comparison on a generated region, against its core sites
from mecplan.scenario import generate_scenario, preset

inp = ex.inputs_from_scenario(generate_scenario(preset("tiny", seed=0)), hour=18)
cfg = ex.SweepConfig(budgets=[10.0], fixed_dcs=list(inp.g.core_dcs), mec_b_sar=[0.0, 100.0])
rep = ex.compare_fixed(cfg, inp)
for m in rep.mec:
    print(f"b_sar {m['b_sar']:g}: 1+1 on {rep.fixed_dcs} needs {m['capacity_ratio']:.2f}x the MEC DC capacity")
