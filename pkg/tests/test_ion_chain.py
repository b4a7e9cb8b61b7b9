import numpy as np
import pytest
import scipy.linalg

from iontfim.errors import ZigzagInstabilityError
from iontfim.ion_chain import (
    ChainGeometry,
    TrapParameters,
    chain_geometry,
    equilibrium_positions,
    potential_gradient,
    transverse_modes,
)

from conftest import gradient_descent_positions


def trap(n=10, axial=0.7, transverse=4.1, recoil=18.5):
    return TrapParameters(
        n_ions=n, axial_freq=axial, transverse_com_freq=transverse, recoil_freq=recoil
    )


class TestTrapParameters:
    def test_rejects_single_ion(self):
        with pytest.raises(ValueError):
            trap(n=1)

    def test_rejects_axial_above_transverse(self):
        with pytest.raises(ValueError, match="linear chain"):
            trap(axial=5.0, transverse=4.1)

    @pytest.mark.parametrize("field", ["axial_freq", "transverse_com_freq", "recoil_freq"])
    def test_rejects_nonpositive_frequency(self, field):
        kwargs = dict(n_ions=4, axial_freq=0.7, transverse_com_freq=4.1, recoil_freq=18.5)
        kwargs[field] = 0.0
        with pytest.raises(ValueError):
            TrapParameters(**kwargs)


class TestEquilibriumPositions:
    def test_two_ions_analytic(self):
        # stationarity of u^2/2 + 1/(2u) gives u = (1/4)^(1/3)
        u = equilibrium_positions(trap(n=2))
        expected = 4.0 ** (-1.0 / 3.0)
        assert u == pytest.approx([-expected, expected], abs=1e-10)

    def test_three_ions_middle_at_zero(self):
        u = equilibrium_positions(trap(n=3))
        assert u[1] == 0.0

    def test_matches_gradient_descent_oracle(self):
        u = equilibrium_positions(trap(n=10))
        oracle = gradient_descent_positions(10)
        assert np.max(np.abs(u - oracle)) < 1e-8

    @pytest.mark.parametrize("n", [2, 3, 5, 8, 13, 16])
    def test_gradient_small_and_antisymmetric(self, n):
        u = equilibrium_positions(trap(n=n))
        assert np.linalg.norm(potential_gradient(u)) < 1e-10
        assert np.max(np.abs(u + u[::-1])) < 1e-9
        assert np.all(np.diff(u) > 0)


class TestTransverseModes:
    def test_com_mode_is_highest_and_uniform(self):
        for n in (2, 5, 10):
            geom = chain_geometry(trap(n=n))
            assert geom.mode_freqs[0] == pytest.approx(4.1, abs=1e-9)
            assert np.max(np.abs(geom.mode_vectors[:, 0] - 1.0 / np.sqrt(n))) < 1e-9
            assert np.all(np.diff(geom.mode_freqs) < 0)

    def test_two_ion_rocking_mode_closed_form(self):
        geom = chain_geometry(trap(n=2, axial=0.62))
        assert geom.mode_freqs[1] == pytest.approx(np.sqrt(4.1**2 - 0.62**2), rel=1e-12)

    @pytest.mark.parametrize("axial", [0.62, 0.78, 0.88])
    def test_spectrum_matches_independent_eigensolver(self, axial):
        t = trap(n=10, axial=axial)
        u = equilibrium_positions(t)
        geom = transverse_modes(t, u)
        # oracle: assemble the Hessian pairwise and use a different LAPACK driver
        ratio2 = (t.transverse_com_freq / t.axial_freq) ** 2
        hess = np.diag(np.full(10, ratio2))
        for i in range(10):
            for j in range(10):
                if i != j:
                    w = 1.0 / abs(u[i] - u[j]) ** 3
                    hess[i, j] += w
                    hess[i, i] -= w
        oracle = scipy.linalg.eigh(hess, driver="ev", eigvals_only=True)
        oracle_freqs = t.axial_freq * np.sqrt(oracle)[::-1]
        assert np.max(np.abs(geom.mode_freqs / oracle_freqs - 1.0)) < 1e-9

    @pytest.mark.parametrize("axial", [0.62, 0.78])
    def test_spectrum_matches_finite_difference_oracle(self, axial):
        t = trap(n=10, axial=axial)
        u = equilibrium_positions(t)
        geom = transverse_modes(t, u)

        # oracle: numerically differentiate the transverse restoring force
        # V_t(x) = (ratio^2/2) sum x_i^2 + sum_{i<j} x-dependence of Coulomb
        ratio2 = (t.transverse_com_freq / t.axial_freq) ** 2

        def transverse_potential(x):
            val = 0.5 * ratio2 * np.sum(x**2)
            for i in range(10):
                for j in range(i + 1, 10):
                    val += 1.0 / np.hypot(u[i] - u[j], x[i] - x[j])
            return val

        h = 1e-3
        hess = np.zeros((10, 10))
        for i in range(10):
            for j in range(10):
                xpp = np.zeros(10); xpp[i] += h; xpp[j] += h
                xpm = np.zeros(10); xpm[i] += h; xpm[j] -= h
                xmp = np.zeros(10); xmp[i] -= h; xmp[j] += h
                xmm = np.zeros(10); xmm[i] -= h; xmm[j] -= h
                hess[i, j] = (
                    transverse_potential(xpp)
                    - transverse_potential(xpm)
                    - transverse_potential(xmp)
                    + transverse_potential(xmm)
                ) / (4 * h * h)
        oracle_freqs = t.axial_freq * np.sqrt(scipy.linalg.eigvalsh(hess))[::-1]
        assert np.max(np.abs(geom.mode_freqs / oracle_freqs - 1.0)) < 1e-4

    def test_mode_vectors_orthonormal_and_complete(self):
        geom = chain_geometry(trap(n=12))
        b = geom.mode_vectors
        assert np.max(np.abs(b.T @ b - np.eye(12))) < 1e-9
        assert np.max(np.abs(b @ b.T - np.eye(12))) < 1e-9

    def test_lowest_mode_decreases_with_axial_confinement(self):
        lows = [
            chain_geometry(trap(n=10, axial=a)).mode_freqs[-1]
            for a in np.linspace(0.62, 0.88, 6)
        ]
        assert np.all(np.diff(lows) < 0)

    def test_zigzag_instability_reported(self):
        with pytest.raises(ZigzagInstabilityError, match="ratio"):
            chain_geometry(trap(n=12, axial=2.5, transverse=4.1))

    def test_ten_ion_chain_buckles_above_critical_axial_freq(self):
        # soft zigzag mode crosses zero near 0.892 MHz for this chain
        chain_geometry(trap(n=10, axial=0.89))
        with pytest.raises(ZigzagInstabilityError):
            chain_geometry(trap(n=10, axial=0.90))

    def test_rejects_non_equilibrium_positions(self):
        with pytest.raises(ValueError, match="equilibrium"):
            transverse_modes(trap(n=4), np.array([-2.0, -1.0, 1.0, 2.0]))
