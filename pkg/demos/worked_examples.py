"""Walk through the two small hand-built networks.

The first shows how a meta path picks out concrete path instances. The
second shows how the three meta-path features score two enterprises that
share controllers with risky companies.
"""

from hinrisk.hin import default_sme_schema
from hinrisk.metapath import match_instances, parse_metapath, reachable_targets
from hinrisk.mpfeatures import HeteSimEngine, countsim_mp, hetesim_mp, naive_mp
from hinrisk.synthgen import figure3_fixture, figure5_fixture

schema = default_sme_schema()

print("== Path instances ==")
g = figure3_fixture()
mp = parse_metapath("E-[parent]->E-[report]->N", schema)
print(f"meta path {mp}")
for inst in match_instances(g, "v1", mp):
    print(f"  instance {inst}")
print(f"  news reachable from v1: {sorted(reachable_targets(g, 'v1', mp))}")

print()
print("== Controller network ==")
g = figure5_fixture()
mp = parse_metapath("E-[control]->P-[shareholder]->E", schema)
risk = {nid: bool(n.risk_label) for nid, n in g.nodes.items()}
engine = HeteSimEngine(g)
print(f"meta path {mp}")
for x in ("J", "K"):
    targets = sorted(reachable_targets(g, x, mp))
    risky = [t for t in targets if risk[t]]
    print(f"  {x}: {len(match_instances(g, x, mp))} instances reach {targets}, risky {risky}")
    print(f"     naive   {naive_mp(g, x, mp, risk, exact=True)} = {naive_mp(g, x, mp, risk):.4f}")
    print(f"     count   {countsim_mp(g, x, mp):.4f}")
    print(f"     hetesim {hetesim_mp(g, engine, x, mp, risk):.4f}")
