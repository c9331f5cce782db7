"""Slot-by-slot tracking on a moving bench-small scene.

Compares the adaptive optimizer, the configuration frozen at slot 0 and the
Kalman predict-then-optimize baseline against a per-slot exhaustive front.
Run with ``python demos/tracking.py [seed] [slots]``. A few minutes for 10 slots.
"""
import sys

from fas_mobo.baselines import exhaustive, kalman_predict_then_optimize, static_frozen
from fas_mobo.harness.experiment import cell_scenes, spec_from_dict
from fas_mobo.optimizer import run_dynamic


def main(seed: int = 0, n_slots: int = 10) -> None:
    spec = spec_from_dict({"profile": "bench-small", "mode": "dynamic", "seeds": [seed], "n_slots": n_slots})
    space = spec.space
    scenes = cell_scenes(spec, seed)
    params = spec.optimizer_params(spec.methods[0], seed)
    stars = [exhaustive(sc, space).hv for sc in scenes]

    adaptive = run_dynamic(scenes, space, params, spec.per_slot_budget, spec.window)
    # Slot 0 is shared; afterwards the slot-0 archive is only re-evaluated.
    frozen = adaptive.slots[:1] + static_frozen(adaptive.slots[0].archive.configs(), scenes[1:], space, first_slot=1)
    kalman = kalman_predict_then_optimize(
        scenes, space, spec.per_slot_budget, spec.weight, seed, slot_s=spec.scenario.slot_s, accel_std=spec.scenario.accel_bound
    )

    print("slot  adaptive  frozen  kalman   (HV / per-slot HV*)")
    for t, star in enumerate(stars):
        row = [adaptive.slots[t].final_hv, frozen[t].final_hv, kalman[t].final_hv]
        print(f"{t:4d}  " + "  ".join(f"{v / star:7.3f}" for v in row))


if __name__ == "__main__":
    args = [int(a) for a in sys.argv[1:3]]
    main(*args)
