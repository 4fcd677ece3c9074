import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from oracles import (
    ho_populations_by_overlap,
    overlap_by_quadrature,
    photon_rho_gram,
    photon_rho_position_basis,
)

from atomscatter import (
    DomainError,
    PhotonDensityMatrix,
    ScatteringGeometry,
    TwoAtomScatterConfig,
    WeakExcitationError,
    Wavepacket,
    build_two_atom_state,
    coherent_overlap,
    debye_waller,
    ground_state_width,
    ho_populations,
    photon_density_matrix,
    scatter_decomposition,
)
from atomscatter.constants import AMU

LI7_SPEC_MASS = 7 * 1.66054e-27
KHZ = 2 * np.pi * 1e3


def x_only(wavelength, q):
    """Geometry whose Q points along +x with magnitude q."""
    k = 2 * np.pi / wavelength
    # k_in and k_out symmetric about the z axis
    half = np.arcsin(q / (2 * k))
    k_in = np.array([np.sin(half), 0.0, np.cos(half)])
    k_out = np.array([-np.sin(half), 0.0, np.cos(half)])
    geom = ScatteringGeometry(wavelength, k_in, k_out)
    assert np.allclose(geom.Q[1:], 0, atol=1e-9)
    return geom


class TestGroundStateWidth:
    def test_li_deep(self):
        assert ground_state_width(LI7_SPEC_MASS, 256 * KHZ) == pytest.approx(53e-9, abs=1e-9)

    def test_li_shallow(self):
        assert ground_state_width(LI7_SPEC_MASS, 164 * KHZ) == pytest.approx(66e-9, abs=1e-9)

    def test_quarter_scaling(self):
        m = 162 * AMU
        assert ground_state_width(m, 4 * 21 * KHZ) == pytest.approx(0.5 * ground_state_width(m, 21 * KHZ), rel=1e-14)

    @pytest.mark.parametrize("mass, omega", [(0.0, 1.0), (-1.0, 1.0), (1e-26, 0.0), (1e-26, -5.0)])
    def test_domain(self, mass, omega):
        with pytest.raises(DomainError):
            ground_state_width(mass, omega)


class TestCoherentOverlap:
    def test_identity(self):
        assert coherent_overlap(0) == 1.0

    def test_against_gaussian_integral(self):
        # |beta|^2 = 0.4943 is the Li deep-lattice Lamb-Dicke parameter squared
        x0 = 1.0
        q = np.sqrt(0.4943)
        reference = overlap_by_quadrature(q, x0)
        value = coherent_overlap(1j * q * x0)
        assert value == pytest.approx(reference.real, abs=1e-12)
        assert abs(reference.imag) < 1e-12
        assert value**2 == pytest.approx(0.61, abs=0.005)

    @given(st.complex_numbers(max_magnitude=50, allow_nan=False, allow_infinity=False))
    def test_bounded(self, beta):
        assert 0 <= coherent_overlap(beta) ** 2 <= 1


class TestDebyeWaller:
    def test_li_deep_value(self):
        packet = Wavepacket(LI7_SPEC_MASS, 256 * KHZ)
        geom = ScatteringGeometry.from_angle(671e-9, np.pi / 2)
        assert geom.q_magnitude == pytest.approx(np.sqrt(2) * 2 * np.pi / 671e-9, rel=1e-12)
        assert debye_waller(packet, geom) == pytest.approx(0.61, abs=0.01)

    def test_dy_21k(self):
        packet = Wavepacket(162 * AMU, 21 * KHZ)
        geom = ScatteringGeometry.from_angle(626e-9, np.pi / 2)
        assert debye_waller(packet, geom) == pytest.approx(0.74, abs=0.01)

    def test_exponent_doubles_at_unit_omega_t(self):
        geom = ScatteringGeometry.from_angle(671e-9, 1.1, 0.4)
        iso = Wavepacket(7 * AMU, 250 * KHZ)
        t = 1 / iso.omega[0]
        assert debye_waller(iso, geom, t) == pytest.approx(debye_waller(iso, geom) ** 2, rel=1e-12)

    def test_no_momentum_transfer(self):
        geom = ScatteringGeometry.from_angle(671e-9, 0.0)
        assert debye_waller(Wavepacket(7 * AMU, 256 * KHZ), geom) == 1.0

    def test_negative_time_rejected(self):
        with pytest.raises(DomainError):
            debye_waller(Wavepacket(7 * AMU, 256 * KHZ), ScatteringGeometry(671e-9), -1e-6)

    def test_thermal_widening(self):
        geom = ScatteringGeometry.from_angle(671e-9, np.pi / 2)
        cold = Wavepacket(7 * AMU, 256 * KHZ)
        hot = Wavepacket(7 * AMU, 256 * KHZ, nbar=0.5)
        # x_rms^2 doubles at nbar = 1/2
        assert debye_waller(hot, geom) == pytest.approx(debye_waller(cold, geom) ** 2, rel=1e-12)

    def test_width_not_momentum_sets_d(self):
        # a thermal packet and a colder one in a weaker trap with the same rms width
        geom = ScatteringGeometry.from_angle(671e-9, np.pi / 2)
        hot = Wavepacket(7 * AMU, 256 * KHZ, nbar=1.0)
        cold = Wavepacket.from_rms_width(7 * AMU, hot.rms_width())
        assert cold.omega[0] < hot.omega[0]
        assert debye_waller(cold, geom) == pytest.approx(debye_waller(hot, geom), rel=1e-12)

    @settings(max_examples=60)
    @given(
        f=st.floats(1e3, 1e6), nbar=st.floats(0, 5), theta=st.floats(0, np.pi),
        t1=st.floats(0, 1e-4), dt=st.floats(0, 1e-4), scale=st.floats(1, 3),
    )
    def test_monotone(self, f, nbar, theta, t1, dt, scale):
        geom = ScatteringGeometry.from_angle(671e-9, theta)
        p = Wavepacket(7 * AMU, 2 * np.pi * f, nbar=nbar)
        d = debye_waller(p, geom, t1)
        assert 0 < d <= 1 or d == 0.0
        assert debye_waller(p, geom, t1 + dt) <= d
        assert debye_waller(Wavepacket(7 * AMU, 2 * np.pi * f, nbar=nbar + scale), geom, t1) <= d
        # larger x0 (weaker trap)
        assert debye_waller(Wavepacket(7 * AMU, 2 * np.pi * f / scale, nbar=nbar), geom, 0.0) <= \
            debye_waller(p, geom, 0.0)
        # larger |Q|: longer wavelength shrinks Q at fixed angle
        assert debye_waller(p, ScatteringGeometry.from_angle(671e-9 * scale, theta), t1) >= d


class TestGeometry:
    @given(st.floats(1e-7, 2e-6), st.floats(0, np.pi), st.floats(0, 2 * np.pi))
    def test_kinematics(self, wl, theta, phi):
        g = ScatteringGeometry.from_angle(wl, theta, phi)
        k = 2 * np.pi / wl
        assert np.linalg.norm(g.k_in) == pytest.approx(k, rel=1e-12)
        assert np.linalg.norm(g.k_out) == pytest.approx(k, rel=1e-12)
        assert g.q_magnitude == pytest.approx(2 * k * np.sin(theta / 2), rel=1e-9, abs=1e-6 * k)


def make_config(eps=0.05, q=1.3e7, x0=53e-9, r1=(0, 0, 0), r2=None):
    geom = x_only(671e-9, q)
    packet = Wavepacket.from_rms_width(7 * AMU, x0)
    r2 = r1 if r2 is None else r2
    return TwoAtomScatterConfig(eps, r1, r2, geom, packet)


class TestTwoAtomState:
    def test_no_scattering(self):
        s = build_two_atom_state(make_config(eps=0.0))
        assert np.allclose(s.normalized_coefficients, [1, 0, 0])

    def test_equal_branch_moduli(self):
        s = build_two_atom_state(make_config(eps=0.03 + 0.04j, r2=(1e-7, 2e-7, 3e-7)))
        assert abs(s.coefficients[1]) == pytest.approx(0.05, rel=1e-14)
        assert abs(s.coefficients[2]) == pytest.approx(0.05, rel=1e-14)

    def test_same_site_same_phase(self):
        s = build_two_atom_state(make_config(r1=(1e-7, 0, 0), r2=(1e-7, 0, 0)))
        assert s.coefficients[1] == s.coefficients[2]

    def test_norm_matches_density_matrix_trace(self):
        conf = make_config(r2=(2.1e-7, 0, 0))
        assert build_two_atom_state(conf).norm ** 2 == pytest.approx(photon_density_matrix(conf).norm, rel=1e-14)

    def test_weak_excitation_guard(self):
        with pytest.raises(WeakExcitationError, match="weak-excitation"):
            make_config(eps=0.2)

    def test_guard_is_configurable(self):
        geom = ScatteringGeometry(671e-9)
        conf = TwoAtomScatterConfig(0.2, (0, 0, 0), (0, 0, 0), geom, Wavepacket(7 * AMU, 1e6), weak_limit=0.05)
        assert conf.epsilon == 0.2


class TestPhotonDensityMatrix:
    def test_pure_without_recoil(self):
        conf = make_config(q=0.0)
        rho = photon_density_matrix(conf)
        assert rho.incoherent_weight == 0
        assert rho.purity == pytest.approx(1.0, abs=1e-14)

    def test_anti_bragg(self):
        q = 1.3e7
        conf = make_config(q=q, r2=(np.pi / q, 0, 0))
        rho = photon_density_matrix(conf)
        d = conf.debye_waller
        assert abs(rho.coherent_amplitude) < 1e-12
        assert rho.incoherent_weight == pytest.approx(2 * 0.05**2 * (1 - d), rel=1e-14)
        # oracle: atomic Gram-matrix partial trace
        ref = photon_rho_gram(0.05, np.sqrt(d), conf.gamma1, conf.gamma2)
        assert np.allclose(rho.matrix, ref / np.trace(ref).real, atol=1e-14)

    def test_bragg_numbers_by_position_basis_trace(self):
        # D = 0.61 in 1D: q x0 = sqrt(ln(1/0.61))
        x0 = 53e-9
        q = np.sqrt(np.log(1 / 0.61)) / x0
        conf = make_config(eps=0.05, q=q, x0=x0)
        rho = photon_density_matrix(conf)
        assert conf.debye_waller == pytest.approx(0.61, rel=1e-12)
        assert rho.coherent_photons == pytest.approx(6.1e-3, rel=1e-10)
        assert rho.incoherent_photons == pytest.approx(1.95e-3, rel=1e-10)
        ref = photon_rho_position_basis(0.05, q, x0, 1.0, 1.0)
        assert np.allclose(rho.matrix * rho.norm, ref, atol=1e-13)
        # coherent weight is the squared off-diagonal; Fock term is the rest of rho_11
        assert abs(ref[1, 0]) ** 2 == pytest.approx(6.1e-3, rel=1e-10)
        assert ref[1, 1].real - abs(ref[1, 0]) ** 2 == pytest.approx(1.95e-3, rel=1e-9)

    @settings(max_examples=100)
    @given(
        eps_abs=st.floats(0, 0.0999), eps_arg=st.floats(0, 2 * np.pi),
        q=st.floats(0, 1.8e7), x0=st.floats(5e-9, 2e-7),
        sep=st.floats(-2e-6, 2e-6),
    )
    def test_matches_position_basis_oracle(self, eps_abs, eps_arg, q, x0, sep):
        eps = eps_abs * np.exp(1j * eps_arg)
        conf = make_config(eps=eps, q=q, x0=x0, r2=(sep, 0, 0))
        rho = photon_density_matrix(conf)
        assert rho.is_physical()
        ref = photon_rho_gram(eps, coherent_overlap(conf.beta), conf.gamma1, conf.gamma2)
        assert np.allclose(rho.matrix * rho.norm, ref, atol=1e-13)

    def test_reconstruction(self):
        rho = photon_density_matrix(make_config(eps=0.02 - 0.07j, r2=(3e-7, 0, 0)))
        assert np.array_equal(rho.reconstruct(), rho.matrix)
        again = PhotonDensityMatrix.from_components(rho.coherent_amplitude, rho.incoherent_weight)
        assert np.array_equal(again.matrix, rho.matrix)


class TestDecomposition:
    def setup_method(self):
        x0 = 53e-9
        self.packet = Wavepacket.from_rms_width(7 * AMU, x0)
        self.geom = x_only(671e-9, np.sqrt(np.log(1 / 0.61)) / x0)

    def test_single_atom_split(self):
        dec = scatter_decomposition(self.packet, self.geom)
        assert dec.D == pytest.approx(0.61, rel=1e-12)
        assert dec.coherent_photons == pytest.approx(0.61, rel=1e-12)
        assert dec.incoherent_photons == pytest.approx(0.39, rel=1e-12)
        assert dec.f_incoh == 1 - dec.D
        assert dec.total_photons == pytest.approx(1.0, abs=1e-15)

    def test_no_recoil(self):
        dec = scatter_decomposition(self.packet, ScatteringGeometry.from_angle(671e-9, 0.0))
        assert dec.f_incoh == 0.0

    def test_two_atom_bragg(self):
        dec = scatter_decomposition(self.packet, self.geom, n_atoms=2, epsilon=0.05)
        assert dec.coherent_photons == pytest.approx(4 * 0.05**2 * dec.D, rel=1e-12)
        ref = photon_rho_position_basis(0.05, self.geom.q_magnitude, 53e-9, 1.0, 1.0)
        assert abs(ref[1, 0]) ** 2 == pytest.approx(dec.coherent_photons, rel=1e-10)

    @given(st.floats(0.0, 0.1), st.floats(0, 1.8e7))
    def test_single_atom_total_is_eps_squared(self, eps, q):
        dec = scatter_decomposition(self.packet, x_only(671e-9, q), epsilon=eps)
        assert dec.total_photons == pytest.approx(eps**2, rel=1e-12, abs=1e-300)

    def test_bad_atom_count(self):
        with pytest.raises(DomainError):
            scatter_decomposition(self.packet, self.geom, n_atoms=3)


class TestHoPopulations:
    def test_no_displacement(self):
        p = ho_populations(0, 5)
        assert p[0] == 1 and not p[1:].any()

    def test_li_deep_projection(self):
        p = ho_populations(1j * np.sqrt(0.4943), 6)
        assert p[0] == pytest.approx(0.61, abs=0.005)
        ref = ho_populations_by_overlap(np.sqrt(0.4943) / 53e-9, 53e-9, 6)
        assert np.allclose(p, ref, atol=1e-12)

    @pytest.mark.parametrize("b2", [0.0, 0.1, 0.4943, 0.77, 1.0])
    def test_normalization(self, b2):
        assert ho_populations(np.sqrt(b2), 30).sum() >= 1 - 1e-9

    def test_negative_n_max(self):
        with pytest.raises(DomainError):
            ho_populations(0.5, -1)
