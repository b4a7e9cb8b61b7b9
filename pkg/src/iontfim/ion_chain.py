"""Equilibrium structure and transverse normal modes of a linear ion chain.

Positions are dimensionless: lengths are measured in the characteristic
axial length, so the static potential of the chain reduces to

    V(u) = sum_i u_i^2 / 2 + sum_{i<j} 1 / |u_i - u_j|

with no free constants.  Transverse modes are obtained from the Hessian of
the transverse potential evaluated at the axial equilibrium.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConvergenceError, ZigzagInstabilityError

GRADIENT_TOL = 1e-10
NEWTON_BUDGET = 500


@dataclass(frozen=True)
class TrapParameters:
    """Harmonic-trap and drive-recoil frequencies defining a chain.

    Parameters
    ----------
    n_ions : int
        Number of ions, at least 2.
    axial_freq : float
        Axial center-of-mass frequency in MHz.
    transverse_com_freq : float
        Transverse center-of-mass frequency in MHz.  Must exceed the axial
        frequency for a stable linear chain.
    recoil_freq : float
        Photon-recoil frequency of the drive in kHz.
    """

    n_ions: int
    axial_freq: float
    transverse_com_freq: float
    recoil_freq: float

    def __post_init__(self):
        if self.n_ions < 2:
            raise ValueError(f"need at least 2 ions, got {self.n_ions}")
        for name in ("axial_freq", "transverse_com_freq", "recoil_freq"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.axial_freq >= self.transverse_com_freq:
            raise ValueError(
                "axial_freq must be below transverse_com_freq for a linear chain "
                f"(got {self.axial_freq} >= {self.transverse_com_freq} MHz)"
            )


@dataclass(frozen=True)
class ChainGeometry:
    """Equilibrium positions plus the transverse mode spectrum.

    ``mode_freqs`` is sorted descending, so index 0 is the center-of-mass
    mode.  ``mode_vectors[:, m]`` is the orthonormal vector of mode m; the
    sign of each vector is fixed so its largest-magnitude entry is positive.
    ``recoil_freq`` (kHz) is carried along because the spin-spin coupling
    formula needs it together with the mode data.
    """

    positions: np.ndarray
    mode_freqs: np.ndarray  # MHz, descending
    mode_vectors: np.ndarray  # column m = mode m
    recoil_freq: float  # kHz

    @property
    def n_ions(self) -> int:
        return len(self.positions)


def potential_gradient(u: np.ndarray) -> np.ndarray:
    """Gradient of the dimensionless chain potential at positions ``u``."""
    diff = u[:, None] - u[None, :]
    np.fill_diagonal(diff, np.inf)
    return u - np.sum(np.sign(diff) / diff**2, axis=1)


def _potential(u: np.ndarray) -> float:
    diff = np.abs(u[:, None] - u[None, :])
    iu = np.triu_indices(len(u), k=1)
    sep = diff[iu]
    if np.any(sep <= 0):
        return np.inf
    return 0.5 * float(np.sum(u**2)) + float(np.sum(1.0 / sep))


def _axial_hessian(u: np.ndarray) -> np.ndarray:
    diff = u[:, None] - u[None, :]
    np.fill_diagonal(diff, np.inf)
    inv3 = 1.0 / np.abs(diff) ** 3
    hess = -2.0 * inv3
    np.fill_diagonal(hess, 1.0 + 2.0 * np.sum(inv3, axis=1))
    return hess


def equilibrium_positions(trap: TrapParameters) -> np.ndarray:
    """Minimize the chain potential with a damped Newton iteration.

    Returns the ordered equilibrium coordinates (dimensionless).  Raises
    :class:`ConvergenceError` if the gradient norm does not drop below
    ``GRADIENT_TOL`` within the iteration budget.
    """
    n = trap.n_ions
    span = 2.018 * n**0.56
    u = np.linspace(-span / 2.0, span / 2.0, n)
    for _ in range(NEWTON_BUDGET):
        grad = potential_gradient(u)
        gnorm = float(np.linalg.norm(grad))
        if gnorm < GRADIENT_TOL:
            # symmetrize: the potential is reflection-even, the minimizer odd
            u = 0.5 * (u - u[::-1])
            return u
        step = np.linalg.solve(_axial_hessian(u), -grad)
        scale, v0 = 1.0, _potential(u)
        # near the minimum the potential change underflows, so a gradient
        # decrease also counts as progress
        while scale > 1e-6:
            trial = u + scale * step
            if _potential(trial) < v0 or (
                np.all(np.diff(trial) > 0)
                and np.linalg.norm(potential_gradient(trial)) < gnorm
            ):
                break
            scale *= 0.5
        u = u + scale * step
    raise ConvergenceError(
        f"equilibrium solver stalled at |grad|={gnorm:.3e} after {NEWTON_BUDGET} iterations"
    )


def transverse_modes(trap: TrapParameters, positions: np.ndarray) -> ChainGeometry:
    """Diagonalize the transverse Hessian at the given equilibrium.

    The highest mode is the center of mass at exactly the transverse trap
    frequency; the Coulomb terms only soften the rest of the spectrum.  A
    negative eigenvalue means the chain would buckle into a zigzag, which is
    reported instead of returning complex frequencies.
    """
    positions = np.asarray(positions, dtype=float)
    grad = potential_gradient(positions)
    if np.linalg.norm(grad) > 1e-8:
        raise ValueError(
            f"positions are not an equilibrium (|grad|={np.linalg.norm(grad):.2e})"
        )
    n = len(positions)
    ratio2 = (trap.transverse_com_freq / trap.axial_freq) ** 2
    diff = positions[:, None] - positions[None, :]
    np.fill_diagonal(diff, np.inf)
    inv3 = 1.0 / np.abs(diff) ** 3
    hess = inv3.copy()
    np.fill_diagonal(hess, ratio2 - np.sum(inv3, axis=1))
    eigvals, eigvecs = np.linalg.eigh(hess)
    if eigvals[0] <= 0:
        raise ZigzagInstabilityError(
            f"chain of {n} ions is transversely unstable at axial/transverse ratio "
            f"{trap.axial_freq / trap.transverse_com_freq:.4f} "
            f"(lowest Hessian eigenvalue {eigvals[0]:.3e})"
        )
    freqs = trap.axial_freq * np.sqrt(eigvals)
    order = np.argsort(freqs)[::-1]
    freqs = freqs[order]
    vecs = eigvecs[:, order]
    for m in range(n):
        if vecs[np.argmax(np.abs(vecs[:, m])), m] < 0:
            vecs[:, m] = -vecs[:, m]
    return ChainGeometry(
        positions=positions,
        mode_freqs=freqs,
        mode_vectors=vecs,
        recoil_freq=trap.recoil_freq,
    )


def chain_geometry(trap: TrapParameters) -> ChainGeometry:
    """Convenience wrapper: solve the equilibrium, then the modes."""
    return transverse_modes(trap, equilibrium_positions(trap))
