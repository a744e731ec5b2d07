"""Protection belt construction and the static power rules.

Builds the default world, walks the offset belt around the building, and
shows how the per-BS power caps react to the belt margin: the regulatory
-3 dB rule versus the calibrated margins, and the CBRS PAL/GAA rule.
"""

import numpy as np

from remshare import (PathlossModel, cbrs_gaa_power, cbrs_pal_protection_area,
                      default_scenario, generate_protection_belt,
                      lsa_static_power, restrict_to_protection_area)
from remshare.units import dbm_to_mw

scenario = default_scenario()
model = PathlossModel.default(scenario.carrier_hz, scenario.polygon)

belt = generate_protection_belt(scenario, spacing_m=1.0, offset_m=0.5)
south = restrict_to_protection_area(belt, scenario.outdoor_region)
print(f"full belt: {len(belt)} points; restricted to the street side: {len(south)}")

print("\nper-BS allowed power (dBm) vs belt margin")
print(f"{'BS':>4} {'gamma=-3 (LSA)':>16} {'gamma=-15':>11} {'gamma=-10, street only':>23}")
for bs in scenario.indoor_bs:
    lsa = lsa_static_power(belt, bs, -3.0, model, scenario.bandwidth_hz)
    cal = lsa_static_power(belt, bs, -15.0, model, scenario.bandwidth_hz)
    area = lsa_static_power(south, bs, -10.0, model, scenario.bandwidth_hz)
    print(f"{bs.id:>4} {lsa:>16.2f} {cal:>11.2f} {area:>23.2f}")

pal = cbrs_pal_protection_area(scenario, 5.0, model, -96.0)
print(f"\nCBRS: PAL protection area covers {len(pal)} grid points "
      f"({len(pal) * 25 / (scenario.area_width_m * scenario.area_height_m):.0%} of the map)")
alloc = cbrs_gaa_power(pal, scenario.indoor_bs, model, -80.0, scenario.bandwidth_hz)
print("GAA powers (mW):", np.round(alloc.p_tx_mw, 6))
print("mean GAA power:", f"{alloc.p_tx_mw.mean():.2e} mW "
      f"(vs {dbm_to_mw(21.0):.1f} mW device cap)")
