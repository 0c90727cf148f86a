"""A short walk through the heatlab API.

Run with ``python3 demos/tour.py``. Each step prints one line.
"""

import math

import numpy as np

from heatlab import KernelParams, Lattice, Schedule, fundamental_solution, make_preset
from heatlab.aronson import search_nu
from heatlab.stable import cauchy_density
from heatlab.verify import verify_uhke


def main():
    lat = Lattice(1, 0.02, 40.0)

    # With Lambda = 1/pi the alpha = 1 kernel generates the Cauchy semigroup.
    k = make_preset("fractional", KernelParams(alpha=1.0, Lambda=1 / math.pi))
    sched = Schedule.auto(k, lat, 0.0, 1.0)
    u = fundamental_solution(k, lat, sched, [0.0])
    r = lat.distances_from([0.0]).ravel()
    near = r <= 5
    err = np.max(np.abs(u.values.ravel()[near] / cauchy_density(1.0, r[near]) - 1))
    print(f"heat kernel at t=1: mass {u.mass:.15f}, max deviation from Cauchy on |x|<=5: {err:.3%}")

    # Fit the constant of the upper bound and refine in h and tau.
    for kind in ("fractional", "cone", "time-oscillating"):
        kk = make_preset(kind, KernelParams(alpha=1.0))
        rep = verify_uhke(kk, lat, Schedule.auto(kk, lat, 0.0, 1.0), [0])
        drift = ", ".join(f"{key} {v:.4f}" for key, v in rep.refinement_drift.items())
        print(f"{kind:>16}: fitted c = {rep.fitted_constant:.4f}  drift [{drift}]  pass={rep.passed}")

    # Smallest nu for which the weight inequality holds on the lattice.
    rep = search_nu(lat, [0.0], 2.0, 1.0, 8.0)
    print(f"nu search at C=8: nu = {rep.values['nu']:g}, 2nu also passes: {rep.values['monotone_at_2nu']}")


if __name__ == "__main__":
    main()
