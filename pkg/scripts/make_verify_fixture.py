"""Regenerate src/ofdm_rsma/data/verify_fixture.json with the grid oracle.

Run once; the JSON is committed and the verify suite compares against it.
"""

import json
from pathlib import Path

import numpy as np

from ofdm_rsma.ltv_channel import ChannelScenario, build_time_channel, effective_coupling, sample_paths
from ofdm_rsma.ofdm_frame import OfdmConfig
from ofdm_rsma.reference_oracle import GridSpec, grid_search_best

OUT = Path(__file__).resolve().parents[1] / "src" / "ofdm_rsma" / "data" / "verify_fixture.json"
CASES = [  # (seed, delta_d, power budget)
    (11, 0.5, 10.0),
    (12, 0.5, 100.0),
    (13, 0.2, 1000.0),
]


def main():
    cfg = OfdmConfig(2, 1, 60e3)
    instances = []
    for seed, delta_d, budget in CASES:
        scn = ChannelScenario("doubly_selective", 2, 0.5, delta_d)
        rng = np.random.default_rng(seed)
        g = [effective_coupling(build_time_channel(sample_paths(scn, cfg, int(rng.integers(2**31))), cfg), cfg).g
             for _ in range(2)]
        grid = GridSpec(21, budget)
        entry = {
            "seed": seed,
            "delta_d": delta_d,
            "power_budget": budget,
            "noise_var": 1.0,
            "levels": grid.levels,
            "couplings_re": [gk.real.tolist() for gk in g],
            "couplings_im": [gk.imag.tolist() for gk in g],
        }
        for scheme in ("rsma", "noma"):
            best = grid_search_best(g, scheme, grid, 1.0)
            entry[f"grid_{scheme}"] = best.sum_rate
            entry[f"grid_{scheme}_common"] = best.alloc.common.tolist()
            entry[f"grid_{scheme}_private"] = best.alloc.private.tolist()
        instances.append(entry)
    OUT.write_text(json.dumps({"instances": instances}, indent=1) + "\n")
    print(f"wrote {OUT}")


if __name__ == "__main__":
    main()
