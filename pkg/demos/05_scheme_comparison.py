"""All five sharing schemes on identical seeds (desk scale).

Reproduces the comparative methodology: per-scheme mean rates with 95%
confidence intervals, street-side 10th percentile degradation against the
indoor-off baseline, and mean indoor BS power.
"""

import dataclasses

from remshare.config import load_default_config
from remshare.simcore import run_campaign

cfg = load_default_config()
ITER, HORIZON = 8, 300

base = run_campaign(cfg.campaign(iterations=ITER, horizon_ms=HORIZON, indoor_enabled=False))
print(f"indoor off: outdoor mean {base.outdoor.mean_rate_bps / 1e6:.2f} Mbps, "
      f"p10 {base.outdoor.p10_rate_bps / 1e6:.2f} Mbps\n")

print(f"{'scheme':>17} {'outdoor p10 deg':>16} {'indoor mean [Mbps]':>19} "
      f"{'+/-CI':>6} {'power [mW]':>11}")
for name in ("modified_lsa", "cbrs", "semi_static", "semi_static_area", "dynamic"):
    scheme = dataclasses.replace(cfg.scheme, scheme=name,
                                 gamma_db=cfg.compare_gamma_db.get(name, cfg.scheme.gamma_db))
    s = run_campaign(cfg.campaign(iterations=ITER, horizon_ms=HORIZON, scheme=scheme))
    deg = 1 - s.outdoor.p10_rate_bps / base.outdoor.p10_rate_bps
    print(f"{name:>17} {deg:>15.1%} {s.indoor.mean_rate_bps / 1e6:>19.2f} "
          f"{s.indoor.ci95_bps / 1e6:>6.2f} {s.mean_indoor_bs_power_mw:>11.4g}")

print("\n(the CLI writes the same comparison plus per-scheme CDF files: "
      "remshare compare --config <cfg> --out <dir>)")
