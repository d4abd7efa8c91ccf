"""Shots to score: sample a noisy device, estimate correlators, mitigate, score.

Run: python3 demos/scoring_pipeline.py   (about a minute)
The same steps are available as `mbqs reference`, `mbqs sample` and `mbqs score`.
"""

from mbqs import ed, scoring, surge
from mbqs.freefermion import FreeFermionQuench
from mbqs.quench_model import A_RUBY, C6_RUBY, QuenchSpec, coupling_J, ising_to_rydberg

J = coupling_J(C6_RUBY, A_RUBY)
noise = ed.NoiseParams()
raw, mitigated = {}, {}
for L in range(4, 9):
    t_star = surge.numeric_surge(L, 1.0, J, "down").t_star
    ells, _ = scoring.p2_distances(L)
    theory = dict(zip(ells, FreeFermionQuench(L, 1.0, J, "down").connected(t_star, ells)))
    params = ising_to_rydberg(QuenchSpec(L, 1.0, J, "down", (t_star,)))
    rec = ed.noisy_shot_sampler(params, noise, t_star, 300, (0, L))
    est = scoring.estimate_correlators(rec)
    raw[L] = scoring.p2_score(est["g2"], theory, L)
    fixed = scoring.readout_mitigate(est, noise.p_fp, noise.p_fn)
    mitigated[L] = scoring.p2_score(fixed["g2"], theory, L)
    print(f"L={L}: P2 raw {raw[L].value:.3f} +- {raw[L].stderr:.3f}, "
          f"mitigated {mitigated[L].value:.3f} +- {mitigated[L].stderr:.3f}")

for name, p2 in (("raw", raw), ("mitigated", mitigated)):
    rep = scoring.mbqs_score(p2, 0.5, epsilons=(0.1, 0.25))
    print(f"\n{name}: S = {rep.S} at eps = 0.5")
    for L, eps, status in rep.volumetric_rows():
        print(f"  L={L} eps={eps:<4} {status}")
