"""Static search on one bench-small scene: G-MOBO against random search and the exhaustive front.

Run with ``python demos/static_search.py [seed]``. Takes under a minute.
"""
import sys

import numpy as np

from fas_mobo.baselines import exhaustive, random_search
from fas_mobo.config_space import count_feasible
from fas_mobo.harness.experiment import cell_scenes, spec_from_dict
from fas_mobo.optimizer import run_static


def main(seed: int = 0) -> None:
    spec = spec_from_dict({"profile": "bench-small", "seeds": [seed]})
    space = spec.space
    scene = cell_scenes(spec, seed)[0]
    params = spec.optimizer_params(spec.methods[0], seed)
    print(f"{count_feasible(space):,} feasible configurations, budget {params.budget}")

    best = exhaustive(scene, space)
    print(f"exhaustive front: {len(best.archive)} points, HV* = {best.hv:.3f}")

    mobo = run_static(scene, space, params)
    rand = random_search(scene, space, params.budget, seed)
    for name, trace in (("g-mobo", mobo), ("random", rand)):
        hv = trace.hv / best.hv
        checkpoints = "  ".join(f"n={n}: {hv[n - 1]:.3f}" for n in (params.n_init, 100, params.budget))
        print(f"{name:7s} HV/HV*  {checkpoints}")

    print("\ng-mobo archive (r_c, r_s) in bits/s/Hz:")
    for (r_c, r_s), cfg in zip(mobo.archive.points(), mobo.archive.configs()):
        print(f"  {r_c:6.2f} {r_s:6.2f}  tx={cfg.tx_ports} rx={cfg.rx_ports} orient={cfg.orientation_idx} beams={cfg.beam_idx}")
    front = best.archive.points()
    print("exhaustive extremes:", np.round(front[np.argmax(front[:, 0])], 2), np.round(front[np.argmax(front[:, 1])], 2))


if __name__ == "__main__":
    main(int(sys.argv[1]) if len(sys.argv) > 1 else 0)
