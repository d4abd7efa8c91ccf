"""Acceptance criteria, one test each.

Every test prints a single ``CRITERION n PASS|FAIL`` line with the measured
numbers before asserting. Run ``python3 tests/test_acceptance.py`` to get the
eight lines without pytest.
"""

import json
import os
import sys
import tempfile
import time

import numpy as np
import pytest

from mbqs import cli, ed, scoring, surge
from mbqs.freefermion import FreeFermionQuench
from mbqs.pfaffian import pfaffian
from mbqs.quench_model import (A_RUBY, C6_RUBY, QuenchSpec, coupling_J, induced_field_hatm,
                               ising_to_rydberg, ring_distance)
from mbqs.records import read_records, read_table


def criterion_1():
    """Free fermions against dense ED."""
    worst, n_cases = 0.0, 0
    for L in (4, 6, 8, 10, 12):
        for g in (0.5, 1.0):
            H = ed.build_ising_ring(L, g, 1.0)
            for state in ("plus", "down"):
                # t* only sets the time window here
                t_star = surge.numeric_surge(L, g, 1.0, state, step_jt=0.01).t_star
                ts = np.linspace(0.0, 1.2 * t_star, 21)
                ff = FreeFermionQuench(L, g, 1.0, state)
                mz = ff.one_point_many(ts)
                psis = ed.evolve(H, ed.initial_state(L, state), ts)
                ells = list(range(1, L))
                for t, m, psi in zip(ts, mz, psis):
                    ref = ed.observables(psi, L)
                    zz = ff.two_point(t, ells)
                    worst = max(worst,
                                abs(m - ref["one_point"][0]),
                                np.max(np.abs(zz - ref["two_point"][0, 1:])),
                                np.max(np.abs(zz - m * m - ref["connected"][0, 1:])))
                n_cases += 1
    return worst <= 1e-8, f"{n_cases} (L, g, state) cases x 21 times, max abs deviation {worst:.2e} (tol 1e-8)"


def criterion_2():
    """Linear surge law for the plus state."""
    pairs = [(L, surge.numeric_surge(L, 1.0, 1.0, "plus", step_jt=1e-3).t_star) for L in range(6, 21)]
    reg = surge.surge_regression(pairs)
    ok = abs(reg.slope - 0.26) <= 0.02 and abs(reg.intercept - 0.078) <= 0.05 and reg.r2 >= 0.99
    return ok, f"slope {reg.slope:.4f}, intercept {reg.intercept:.4f}, R2 {reg.r2:.5f}"


def criterion_3():
    """Analytic estimate against the numeric peak of the L = 20 ring."""
    L, ok, parts = 20, True, []
    for g in (0.2, 0.4, 0.6, 0.8):
        tau = surge.surge_estimate(g, 0.5)
        t_f = surge.fermi_time(L, g, 1.0)
        # band edges are interpolated, so a 0.005 grid resolves them
        band = surge.numeric_surge(L, g, 1.0, "down", step_jt=0.005).band
        inside = band[0] <= tau * t_f <= band[1]
        ok &= 1.0 <= tau <= 1.4 and inside
        parts.append(f"g={g}: t*/t_F={tau:.3f}, band/t_F=[{band[0] / t_f:.3f}, {band[1] / t_f:.3f}]")
    return ok, "; ".join(parts)


def criterion_4():
    """Exponential decay of the antipodal peak."""
    rows, fit = surge.peak_height_scan([20, 40, 60, 80, 100, 120])
    heights = [r[2] for r in rows]
    decreasing = all(b < a for a, b in zip(heights, heights[1:]))
    ok = decreasing and fit["r2"] >= 0.98
    return ok, f"heights {', '.join(f'{h:.4f}' for h in heights)}; log-linear R2 {fit['r2']:.4f}"


def criterion_5():
    """Dephasing law beta and the predicted score."""
    gammas = (0.02, 0.05, 0.1, 0.2)
    samples = []
    for L in (4, 6, 8):
        for g in (0.5, 1.0):
            for gm, eta in zip(gammas, ed.dephasing_eta(L, g, gammas, J=1.0, state="down")):
                samples.append((gm, g, L, eta))
    beta = scoring.dephasing_fit(samples)
    S = scoring.predicted_score(1 / 20, 0.5, beta)
    ok = 0.08 <= beta <= 0.16 and round(S) in (10, 11)
    return ok, f"beta {beta:.4f}, predicted S {S:.2f} (rounds to {round(S)})"


def criterion_6():
    """Noiseless Rydberg ring against the Ising reference at the surge time."""
    J = coupling_J(C6_RUBY, A_RUBY)
    devs = {}
    for L in (6, 8, 10):
        t_star = surge.numeric_surge(L, 1.0, J, "down").t_star
        params = ising_to_rydberg(QuenchSpec(L, 1.0, J, "down", (t_star,)), C6_RUBY, A_RUBY)
        psi0 = ed.initial_state(L, "down")
        g_ryd = ed.ring_g2(ed.evolve(ed.build_rydberg_ring(params), psi0, t_star), L)["connected"]
        ells, _ = scoring.p2_distances(L)
        theory = {ell: FreeFermionQuench(L, 1.0, J, "down").connected(t_star, [ell])[0] for ell in ells}
        devs[L] = scoring.p2_score({ell: g_ryd[ell - 1] for ell in ells}, theory, L).value
    ok = all(d <= 0.05 for d in devs.values())
    return ok, ", ".join(f"L={L}: {d:.4f}" for L, d in devs.items()) + " (tol 0.05)"


def _within(est, truth, k=3.0):
    return abs(est.value - truth) <= k * est.stderr


def criterion_7():
    """Sampler, estimators and score end to end at L = 8."""
    L, shots = 8, 5000
    with tempfile.TemporaryDirectory() as tmp:
        ref, clean, noisy, full = (os.path.join(tmp, d) for d in ("ref", "clean", "noisy", "full"))
        assert cli.main(["reference", "--L", str(L), "--state", "down", "--out", ref]) == 0
        base = ["sample", "--L", str(L), "--shots", str(shots), "--hamiltonian", "ising"]
        assert cli.main(base + ["--noise", "none", "--out", clean]) == 0
        assert cli.main(base + ["--noise", "readout", "--seed", "1", "--out", noisy]) == 0
        assert cli.main(["score", "--records", clean, "--reference", ref, "--epsilon", "0.1",
                         "--out", os.path.join(tmp, "s0")]) == 0
        with open(os.path.join(tmp, "s0", "score_report.json")) as fh:
            p2 = json.load(fh)["p2"][str(L)]

        _, rows = read_table(os.path.join(ref, "targets.csv"), cli.TARGET_COLUMNS)
        truth = {int(r[3]): r[4] for r in rows}
        one_truth = rows[0][5]
        est = scoring.estimate_correlators(read_records(os.path.join(clean, f"shots_L{L}.txt")))
        clean_ok = all(_within(est["g2"][ell], v) for ell, v in truth.items())
        noise = ed.NoiseParams()
        mit = scoring.readout_mitigate(
            scoring.estimate_correlators(read_records(os.path.join(noisy, f"shots_L{L}.txt"))),
            noise.p_fp, noise.p_fn)
        mit_ok = _within(mit["one_point"], one_truth) and all(_within(mit["g2"][ell], v) for ell, v in truth.items())

        # full device noise, no mitigation: the score lands in the mid single digits
        sizes = "4..10"
        assert cli.main(["reference", "--L", sizes, "--state", "down", "--out", ref]) == 0
        assert cli.main(["sample", "--L", sizes, "--shots", "500", "--out", full]) == 0
        assert cli.main(["score", "--records", full, "--reference", ref, "--out", os.path.join(tmp, "s1")]) == 0
        with open(os.path.join(tmp, "s1", "score_report.json")) as fh:
            S_noisy = json.load(fh)["S"]
    zs = [abs(est["g2"][ell].value - v) / est["g2"][ell].stderr for ell, v in truth.items()]
    zm = [abs(mit["g2"][ell].value - v) / mit["g2"][ell].stderr for ell, v in truth.items()]
    ok = p2["value"] <= 0.1 and clean_ok and mit_ok and 4 <= S_noisy <= 9
    return ok, (f"P2 {p2['value']:.4f} +- {p2['stderr']:.4f}; max |z| noiseless {max(zs):.2f}, "
                f"mitigated {max(zm):.2f} (tol 3); full-noise S {S_noisy} (range 4..9)")


def criterion_8():
    """Property suites."""
    rng = np.random.default_rng(2024)
    checks = {}

    worst = 0.0
    for _ in range(200):
        n = 2 * int(rng.integers(1, 11))
        X = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n)) * rng.integers(0, 2)
        A = X - X.T
        pf, det = pfaffian(A), np.linalg.det(A)
        worst = max(worst, abs(pf * pf - det) / max(1.0, abs(det)))
    checks["Pf^2=det"] = worst <= 1e-9

    direct = lambda L: sum((1.0 / ring_distance(L, 1.0, ell)) ** 6 for ell in range(1, L))
    checks["hatm"] = max(abs(induced_field_hatm(L) - direct(L)) for L in range(3, 201)) <= 1e-12

    refl = 0.0
    for L, g, state in ((8, 0.5, "plus"), (10, 1.0, "down"), (12, 0.7, "down")):
        ff = FreeFermionQuench(L, g, 1.0, state)
        for t in rng.uniform(0, 4, 3):
            c = ff.connected(t, list(range(1, L)))
            refl = max(refl, np.max(np.abs(c - c[::-1])))
    checks["reflection"] = refl <= 1e-12

    H = ed.build_ising_ring(6, 1.0, 1.0)
    psi0 = ed.initial_state(6, "down")
    ts = np.linspace(0, 2, 11)
    trace_err = max(abs(np.trace(r) - 1) for r in ed.lindblad_dephasing(H, psi0, 0.2, ts))
    unitary = max(np.max(np.abs(r - np.outer(p, p.conj())))
                  for r, p in zip(ed.lindblad_dephasing(H, psi0, 0.0, ts), ed.evolve(H, psi0, ts)))
    checks["lindblad"] = trace_err <= 1e-8 and unitary <= 1e-8

    t = np.linspace(0, 10, 1001)
    scale_ok = True
    for _ in range(50):
        c = rng.uniform(0.5, 6.0)
        y = np.exp(-0.5 * ((t - c) / 0.5) ** 2) + 0.3 * rng.random() * np.exp(-(((t - c - 2) / 0.3) ** 2))
        k = 10 ** rng.uniform(-3, 3)
        scale_ok &= surge.find_surge_time(t, y).t_star == surge.find_surge_time(t, k * y).t_star
    checks["peak scaling"] = scale_ok

    mono = True
    for _ in range(200):
        p2 = {L: (rng.uniform(0, 1.5), rng.uniform(0, 0.2)) for L in range(3, 3 + int(rng.integers(1, 10)))}
        e1, e2 = sorted(rng.uniform(0.01, 1.5, 2))
        mono &= scoring.mbqs_score(p2, e1).S <= scoring.mbqs_score(p2, e2).S
    checks["S monotone"] = mono

    return all(checks.values()), ", ".join(f"{k} {'ok' if v else 'FAILED'}" for k, v in checks.items())


CRITERIA = {
    1: ("oracle equivalence", criterion_1),
    2: ("surge law", criterion_2),
    3: ("analytic surge estimate", criterion_3),
    4: ("peak decay", criterion_4),
    5: ("dephasing law", criterion_5),
    6: ("Rydberg-Ising fidelity", criterion_6),
    7: ("pipeline statistical soundness", criterion_7),
    8: ("property suites", criterion_8),
}


def evaluate(n):
    name, fn = CRITERIA[n]
    t0 = time.perf_counter()
    ok, detail = fn()
    line = f"CRITERION {n} {'PASS' if ok else 'FAIL'} [{name}] {detail} ({time.perf_counter() - t0:.0f} s)"
    return ok, line


@pytest.mark.parametrize("n", sorted(CRITERIA))
def test_criterion(n, capsys):
    ok, line = evaluate(n)
    with capsys.disabled():
        print("\n" + line)
    assert ok, line


if __name__ == "__main__":
    results = [evaluate(n) for n in sorted(CRITERIA)]
    for _, line in results:
        print(line)
    sys.exit(0 if all(ok for ok, _ in results) else 1)
