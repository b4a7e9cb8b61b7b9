"""Shared fixtures and independent oracle implementations.

The oracles here deliberately avoid the code paths used by the package:
dense Hamiltonians are assembled from explicit Kronecker products, the
equilibrium oracle is plain gradient descent, and mode frequencies come
from a finite-difference Hessian.
"""

import numpy as np
import pytest

from iontfim.ion_chain import TrapParameters, chain_geometry

SX = np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex)
SY = np.array([[0.0, -1.0j], [1.0j, 0.0]], dtype=complex)
ID2 = np.eye(2, dtype=complex)


def kron_site_op(op: np.ndarray, site: int, n: int) -> np.ndarray:
    """Embed a single-spin operator at ``site`` (0-based, site 0 = MSB)."""
    out = np.array([[1.0 + 0.0j]])
    for k in range(n):
        out = np.kron(out, op if k == site else ID2)
    return out


def dense_hamiltonian(j_matrix: np.ndarray, b_khz: float, sign: float = 1.0) -> np.ndarray:
    """Explicit matrix for sum_{i<j} J_ij sx sx - B sum_i sy (kHz units)."""
    n = j_matrix.shape[0]
    dim = 2**n
    h = np.zeros((dim, dim), dtype=complex)
    for i in range(n):
        for j in range(i + 1, n):
            if j_matrix[i, j] != 0.0:
                h += sign * j_matrix[i, j] * (
                    kron_site_op(SX, i, n) @ kron_site_op(SX, j, n)
                )
    for i in range(n):
        h -= b_khz * kron_site_op(SY, i, n)
    return h


def gradient_descent_positions(n: int, steps: int = 100_000, tol: float = 1e-12) -> np.ndarray:
    """Gradient descent (Barzilai-Borwein steps) on the chain potential."""

    def gradient(u):
        d = u[:, None] - u[None, :]
        np.fill_diagonal(d, np.inf)
        return u - np.sum(np.sign(d) / d**2, axis=1)

    u = np.linspace(-(n - 1) / 2.0, (n - 1) / 2.0, n) * 0.9
    g = gradient(u)
    step = 0.05
    for _ in range(steps):
        if np.linalg.norm(g) < tol:
            break
        u_new = u - step * g
        if np.any(np.diff(u_new) <= 0):  # crossing: fall back to a tiny step
            u_new = u - 1e-3 * g
        g_new = gradient(u_new)
        du, dg = u_new - u, g_new - g
        denom = float(du @ dg)
        step = float(du @ du) / denom if denom > 0 else 1e-3
        u, g = u_new, g_new
    return u


@pytest.fixture(scope="session")
def paper_trap():
    """Ten-ion trap at the operating point used throughout the tests."""
    return TrapParameters(
        n_ions=10, axial_freq=0.7, transverse_com_freq=4.1, recoil_freq=18.5
    )


@pytest.fixture(scope="session")
def paper_chain(paper_trap):
    return chain_geometry(paper_trap)
