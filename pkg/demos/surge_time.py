"""The correlation surge: first global peak of the antipodal correlator.

Run: python3 demos/surge_time.py
"""

from mbqs import surge

print(" L   J t*   peak g2   75% width")
pairs = []
for L in range(6, 21, 2):
    res = surge.numeric_surge(L, 1.0, 1.0, "plus", step_jt=0.01)
    pairs.append((L, res.t_star))
    print(f"{L:>2}  {res.t_star:5.3f}  {res.peak_height:.4f}   {res.peak_width_75:.3f}")
reg = surge.surge_regression(pairs)
print(f"\nJ t* = {reg.slope:.4f} L + {reg.intercept:.4f}  (R2 = {reg.r2:.5f})")

print("\nAnalytic estimate versus the numeric peak (down state, L = 20):")
for g in (0.5, 0.8):
    tau = surge.surge_estimate(g, 0.5)
    t_f = surge.fermi_time(20, g, 1.0)
    num = surge.numeric_surge(20, g, 1.0, "down", step_jt=0.01)
    print(f"g={g}: estimate {tau * t_f:.3f}, numeric {num.t_star:.3f}, "
          f"75% band [{num.band[0]:.3f}, {num.band[1]:.3f}]")
