"""From the Ising quench to Rydberg drive parameters, and how faithful the map is.

Run: python3 demos/rydberg_mapping.py
"""

import numpy as np

from mbqs import ed, surge
from mbqs.freefermion import FreeFermionQuench
from mbqs.quench_model import (A_RUBY, C6_RUBY, QuenchSpec, blockade_radius, coupling_J,
                               ising_to_rydberg, rydberg_ising_coefficients)

J = coupling_J(C6_RUBY, A_RUBY)
print(f"a = {A_RUBY} um gives J = {J:.3f} rad/us")
for L in (6, 8, 10):
    t_star = surge.numeric_surge(L, 1.0, J, "down").t_star
    p = ising_to_rydberg(QuenchSpec(L, 1.0, J, "down", (t_star,)))
    co = rydberg_ising_coefficients(p)
    psi = ed.evolve(ed.build_rydberg_ring(p), ed.initial_state(L, "down"), t_star)
    ryd = ed.ring_g2(psi, L)["connected"]
    ising = FreeFermionQuench(L, 1.0, J, "down").connected(t_star, range(1, L // 2 + 1))
    print(f"\nL={L}: Omega = {p.omega:.3f}, delta = {p.delta:.3f} rad/us, "
          f"R_b = {blockade_radius(C6_RUBY, p.omega):.2f} um, t* = {t_star:.4f} us")
    print(f"  residual longitudinal field {co['z']:.1e}, next-nearest ZZ / J = {co['zz'][2] / J:.4f}")
    print(f"  g2 Rydberg {np.round(ryd, 4)}")
    print(f"  g2 Ising   {np.round(ising, 4)}")
