import math

import numpy as np
import pytest

from mbqs import ed
from mbqs import freefermion as ff
from mbqs.freefermion import FreeFermionQuench
from mbqs.quench_model import QuenchSpec, coupling_J, C6_RUBY, A_RUBY


def ed_ring(L, g, J, state, t):
    psi = ed.evolve(ed.build_ising_ring(L, g, J), ed.initial_state(L, state), t)
    return ed.ring_g2(psi, L)


class TestModes:
    def test_momenta_L4(self):
        pi = math.pi
        assert np.allclose(ff.momenta(4, "NS"), [-3 * pi / 4, -pi / 4, pi / 4, 3 * pi / 4])
        assert np.allclose(ff.momenta(4, "R"), [-pi, -pi / 2, 0, pi / 2])
        assert np.allclose(ff.momenta(2, "NS"), [-pi / 2, pi / 2])

    @pytest.mark.parametrize("L", [3, 4, 7, 10])
    def test_momenta_counts(self, L):
        for sector in ff.SECTORS:
            k = ff.momenta(L, sector)
            assert len(k) == L
            assert np.all(k >= -math.pi) and np.all(k < math.pi)
        assert np.any(np.isclose(ff.momenta(L, "R"), 0))
        assert not np.any(np.isclose(ff.momenta(L, "NS"), 0))

    def test_gap_closes_at_criticality(self):
        assert ff.dispersion(1.0, 1.3, 0.0) == 0

    def test_amplitude_values(self):
        ks = np.linspace(-3, 3, 13)
        assert np.all(ff.excitation_amplitude(0.0, ks) == 0)
        assert ff.excitation_amplitude(1.0, math.pi / 2) == pytest.approx(1 / (1 + math.sqrt(2)))
        assert np.allclose(ff.excitation_amplitude(0.7, -ks), -ff.excitation_amplitude(0.7, ks))

    def test_bogoliubov_phase(self):
        g, ks = 0.6, np.linspace(-3, 3, 11)
        expected = (g - np.exp(1j * ks)) / np.sqrt(1 + g * g - 2 * g * np.cos(ks))
        assert np.allclose(np.exp(1j * ff.bogoliubov_angle(g, ks)), expected)

    @pytest.mark.parametrize("g", [0.3, 0.9])
    def test_mode_invariants(self, g):
        for m in ff.mode_table(12, g, 1.0, "NS"):
            assert m.epsilon <= 0
            if 0 < m.k < math.pi:
                assert 0 <= m.K < 1

    def test_group_velocity_matches_finite_difference(self):
        g, J, k, h = 0.7, 1.2, 0.9, 1e-6
        fd = (ff.dispersion(g, J, k + h) - ff.dispersion(g, J, k - h)) / (2 * h)
        assert ff.group_velocity(g, J, k) == pytest.approx(fd, rel=1e-7)


class TestPairAmplitude:
    def test_zero_amplitude(self):
        assert ff.pair_amplitude(ff.ModeData(0.5, -1.0, 0.0, 0.0), 3.0) == 0

    def test_initial_value(self):
        m = ff.mode_table(8, 0.5, 1.0, "NS")[5]
        assert ff.pair_amplitude(m, 0.0) == pytest.approx(1j * m.K)

    def test_modulus_is_constant(self):
        m = ff.mode_table(8, 0.5, 1.0, "NS")[6]
        vals = [abs(ff.pair_amplitude(m, t)) for t in np.linspace(0, 20, 41)]
        assert np.ptp(vals) <= 1e-12

    def test_rejects_non_positive_k(self):
        with pytest.raises(ValueError):
            ff.pair_amplitude(ff.ModeData(-0.5, -1.0, 0.0, 0.2), 0.0)

    @pytest.mark.parametrize("sector", ff.SECTORS)
    @pytest.mark.parametrize("g", [0.4, 1.0])
    def test_occupation_matches_real_space_state(self, sector, g):
        """Bogoliubov occupations of the sz-product state equal K^2 / (1 + K^2)."""
        L, J = 8, 1.0
        h = ff.majorana_hamiltonian(L, g, J, ff._PARITY[sector])
        lam, U = np.linalg.eigh(1j * h)
        occ = []
        for t in (0.0, 1.7):
            R = ff._Propagator(h)(t)
            G = R @ ff.initial_covariance(L, "down", sector) @ R.T
            occ_t = []
            for level in np.unique(np.round(lam[lam > 1e-9], 8)):
                V = U[:, np.abs(lam - level) < 1e-6]
                occ_t += list((1 - np.linalg.eigvalsh(V.conj().T @ (1j * G) @ V)) / 2)
            occ.append(sorted(occ_t))
        K = ff.excitation_amplitude(g, ff.momenta(L, sector))
        zero_modes = L - len(occ[0])
        expected = sorted(K**2 / (1 + K**2))[zero_modes:]
        assert np.allclose(occ[0], expected, atol=1e-12)
        # free evolution conserves every occupation
        assert np.allclose(occ[1], occ[0], atol=1e-12)


class TestSectorCorrelators:
    def test_down_state_initial_occupation_matches_ed(self):
        L = 8
        spec = QuenchSpec(L, 1.0, 1.0, "down")
        psi = ed.initial_state(L, "down")
        sx = np.real(psi.conj() @ (ed._transverse(L, 1.0) @ psi)) / L
        for sector in ff.SECTORS:
            c = ff.sector_correlators(spec, sector, 0.0)
            n = np.real(np.diag(c.C))
            assert np.allclose(1 - 2 * n, sx, atol=1e-12)

    def test_gaussian_positivity(self):
        spec = QuenchSpec(8, 1.0, 1.0, "down")
        for sector in ff.SECTORS:
            c = ff.sector_correlators(spec, sector, 0.5)
            assert np.allclose(c.C, c.C.conj().T, atol=1e-12)
            assert np.allclose(c.F, -c.F.T, atol=1e-12)
            ev = np.linalg.eigvalsh(c.C)
            assert ev.min() >= -1e-12 and ev.max() <= 1 + 1e-12

    @pytest.mark.parametrize("state", ["plus", "down"])
    def test_translation_invariance_with_boundary_twist(self, state):
        L = 7
        q = FreeFermionQuench(L, 0.8, 1.0, state)
        for sector, w in q.weights.items():
            if w == 0:
                continue
            c = q.sector_correlators(sector, 1.3)
            twist = -ff._PARITY[sector]  # c_{L+1} = -P c_1
            for M in (c.C, c.F):
                for i in range(L):
                    for j in range(L):
                        sign = twist ** ((i == L - 1) + (j == L - 1))
                        assert M[(i + 1) % L, (j + 1) % L] == pytest.approx(sign * M[i, j], abs=1e-12)

    def test_plus_state_lives_in_one_sector(self):
        q = FreeFermionQuench(6, 1.0, 1.0, "plus")
        with pytest.raises(ValueError):
            q.sector_correlators("R", 0.0)

    def test_unsupported_state(self):
        with pytest.raises(NotImplementedError):
            FreeFermionQuench(6, 1.0, 1.0, "afm")


class TestCorrelators:
    def test_plus_initial_two_point(self):
        spec = QuenchSpec(8, 1.0, 1.0, "plus")
        assert all(ff.string_two_point(spec, 0.0, ell) == pytest.approx(0, abs=1e-14) for ell in range(1, 5))

    def test_down_initial_two_point(self):
        spec = QuenchSpec(8, 1.0, 1.0, "down")
        assert all(ff.string_two_point(spec, 0.0, ell) == pytest.approx(1) for ell in range(1, 5))

    def test_distance_out_of_range(self):
        with pytest.raises(ValueError):
            ff.string_two_point(QuenchSpec(8), 0.1, 5)

    def test_one_point_plus_is_zero(self):
        assert ff.one_point_sigma_z(QuenchSpec(8, 1.0, 1.0, "plus"), 2.3)[0] == 0

    def test_one_point_down_initial(self):
        assert ff.one_point_sigma_z(QuenchSpec(8, 1.0, 1.0, "down"), 0.0)[0] == pytest.approx(-1)

    def test_one_point_against_ed(self):
        J = coupling_J(C6_RUBY, A_RUBY)
        value, flag = ff.one_point_sigma_z(QuenchSpec(10, 1.0, J, "down"), 0.3)
        assert flag == "validated"
        assert value == pytest.approx(ed_ring(10, 1.0, J, "down", 0.3)["one_point"], abs=1e-8)

    def test_one_point_flag_beyond_validated_size(self):
        _, flag = ff.one_point_sigma_z(QuenchSpec(16, 1.0, 1.0, "down"), 0.1)
        assert flag == "verify-against-oracle"

    def test_overlap_modulus_consistent(self):
        q = FreeFermionQuench(10, 0.7, 1.0, "down")
        for t in (0.4, 1.1, 2.5):
            assert abs(q._overlap(t)) == pytest.approx(q.overlap_magnitude(t), rel=1e-9)

    def test_one_point_many_matches_single_calls(self):
        a = FreeFermionQuench(8, 0.5, 1.0, "down").one_point_many([0.3, 0.9, 1.4])
        b = [FreeFermionQuench(8, 0.5, 1.0, "down").one_point(t) for t in (0.3, 0.9, 1.4)]
        assert np.allclose(a, b, atol=1e-12)

    @pytest.mark.parametrize("state", ["plus", "down"])
    def test_connected_product_state(self, state):
        spec = QuenchSpec(8, 1.0, 1.0, state)
        assert all(abs(ff.connected_g2(spec, 0.0, ell)) < 1e-12 for ell in range(1, 8))

    @pytest.mark.parametrize("state", ["plus", "down"])
    def test_connected_against_ed_and_reflection(self, state):
        L, g, t = 8, 0.5, 1.9
        ref = ed.observables(ed.evolve(ed.build_ising_ring(L, g, 1.0), ed.initial_state(L, state), t), L)
        spec = QuenchSpec(L, g, 1.0, state)
        for ell in range(1, L):
            # ED reflection symmetry of the connected matrix
            assert ref["connected"][0, ell] == pytest.approx(ref["connected"][0, L - ell], abs=1e-12)
            assert ff.connected_g2(spec, t, ell) == pytest.approx(ref["connected"][0, ell], abs=1e-9)

    def test_two_point_is_real(self):
        q = FreeFermionQuench(10, 1.0, 1.0, "down")
        gamma = q.covariance("NS", 1.2)
        val = ff.pfaffian(q.string_block(gamma, 5).M)
        assert abs(np.imag(val)) <= 1e-9

    def test_sector_ground_energies_merge(self):
        g = 0.5
        gaps = [abs(ff.max_energy(L, g, 1.0, "R") - ff.max_energy(L, g, 1.0, "NS")) for L in range(4, 17)]
        assert all(b < a for a, b in zip(gaps, gaps[1:]))

    def test_reference_table_layout(self):
        rows = ff.reference_table(QuenchSpec(6, 1.0, 1.0, "down", (0.0, 0.5)))
        assert len(rows) == 2 * 3
        t, ell, conn, disc, m = rows[0]
        assert (t, ell) == (0.0, 1) and conn == pytest.approx(0, abs=1e-12) and disc == pytest.approx(1)
