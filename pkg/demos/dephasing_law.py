"""Dephasing shrinks the surge peak as exp(-beta gamma g L^2).

Run: python3 demos/dephasing_law.py   (about a minute)
"""

from mbqs import ed, scoring

gammas = (0.02, 0.05, 0.1, 0.2)
samples = []
for L in (4, 6):
    for g in (0.5, 1.0):
        etas = ed.dephasing_eta(L, g, gammas)
        samples += [(gm, g, L, eta) for gm, eta in zip(gammas, etas)]
        print(f"L={L} g={g}: eta = " + ", ".join(f"{e:.3f}" for e in etas))
beta = scoring.dephasing_fit(samples)
print(f"\nbeta = {beta:.4f}")
for gamma in (1 / 20, 1 / 5):
    print(f"gamma = {gamma:.2f}: predicted S at eps = 0.5 is {scoring.predicted_score(gamma, 0.5, beta):.1f}")
