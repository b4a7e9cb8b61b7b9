"""Spin-spin coupling matrices: mode-mediated synthesis and power-law fits.

All frequencies are handled internally in kHz; the chain geometry stores
mode frequencies in MHz and is converted once on entry.  A coupling matrix
built with the beatnote above the whole transverse band is antiferromagnetic
(every off-diagonal element positive).
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from .errors import PowerLawFitError, SidebandResonanceError
from .ion_chain import ChainGeometry

COM_PLUS_3_ETA_OMEGA = "com_plus_3_eta_omega"
EXPLICIT = "explicit"

RESONANCE_GUARD_KHZ = 1.0


@dataclass(frozen=True)
class DriveParameters:
    """Global Raman-drive settings.

    ``detuning_rule`` selects how the beatnote detuning is chosen:
    ``"explicit"`` uses ``beatnote_detuning`` (MHz) as given, while
    ``"com_plus_3_eta_omega"`` places it above the center-of-mass mode by
    three Lamb-Dicke-scaled Rabi frequencies.
    """

    rabi_freq: float  # kHz
    beatnote_detuning: float | None = None  # MHz, required for "explicit"
    detuning_rule: str = COM_PLUS_3_ETA_OMEGA

    def __post_init__(self):
        if self.rabi_freq <= 0:
            raise ValueError("rabi_freq must be positive")
        if self.detuning_rule not in (COM_PLUS_3_ETA_OMEGA, EXPLICIT):
            raise ValueError(f"unknown detuning_rule {self.detuning_rule!r}")
        if self.detuning_rule == EXPLICIT and self.beatnote_detuning is None:
            raise ValueError("explicit detuning_rule requires beatnote_detuning")

    def resolve_beatnote_khz(self, chain: ChainGeometry) -> float:
        """Beatnote frequency in kHz for the given chain."""
        if self.detuning_rule == EXPLICIT:
            return float(self.beatnote_detuning) * 1e3
        com_khz = float(chain.mode_freqs[0]) * 1e3
        eta = math.sqrt(chain.recoil_freq / com_khz)
        return com_khz + 3.0 * eta * self.rabi_freq


@dataclass(frozen=True)
class CouplingMatrix:
    """Symmetric Ising couplings in kHz with a fitted power-law summary.

    ``nn_coupling`` is the mean nearest-neighbor coupling; dimensionless
    field ratios elsewhere in the package are taken relative to it.
    ``range_xi`` is the separation at which the fitted power law has decayed
    to 20% of the nearest-neighbor value (infinite for a flat matrix).
    """

    values: np.ndarray
    fitted_j0: float
    fitted_alpha: float
    range_xi: float
    nn_coupling: float
    fit_residual: float

    @property
    def n(self) -> int:
        return self.values.shape[0]

    def __post_init__(self):
        v = self.values
        if v.ndim != 2 or v.shape[0] != v.shape[1]:
            raise ValueError("coupling matrix must be square")
        if not np.array_equal(v, v.T):
            raise ValueError("coupling matrix must be exactly symmetric")
        if np.any(np.diag(v) != 0):
            raise ValueError("coupling matrix must have zero diagonal")


def _range_from_alpha(alpha: float) -> float:
    """5**(1/alpha) guarded against overflow and near-zero fitted exponents."""
    if math.isnan(alpha) or alpha < -1e-9:
        return math.nan
    if alpha < 1e-9 or math.log(5.0) / alpha > 700.0:
        return math.inf  # flat couplings: the 20% point never arrives
    return 5.0 ** (1.0 / alpha)


def _summarize(values: np.ndarray) -> CouplingMatrix:
    n = values.shape[0]
    nn = float(np.mean(np.diagonal(values, offset=1)))
    if n >= 3 and np.all(separation_averages(values) > 0):
        j0, alpha, resid = _fit_power_law_values(values)
    else:
        j0, alpha, resid = nn, math.nan, math.nan
    xi = _range_from_alpha(alpha)
    return CouplingMatrix(
        values=values,
        fitted_j0=j0,
        fitted_alpha=alpha,
        range_xi=xi,
        nn_coupling=nn,
        fit_residual=resid,
    )


def ising_couplings(
    chain: ChainGeometry,
    drive: DriveParameters,
    modes=None,
    resonance_guard_khz: float = RESONANCE_GUARD_KHZ,
) -> CouplingMatrix:
    """Mode-sum coupling matrix for a globally driven chain.

    Each pair (i, j) picks up a contribution from every transverse mode,
    weighted by the mode amplitudes at the two ions and inversely by the
    squared detuning of the beatnote from the mode.  ``modes`` optionally
    restricts the sum to a subset of mode indices (0 = center of mass),
    which is useful for isolating single-mode limits.

    Output is in kHz: rabi^2 * recoil / (beatnote^2 - mode^2) with all
    frequencies in kHz.
    """
    mu = drive.resolve_beatnote_khz(chain)
    freqs = chain.mode_freqs * 1e3  # kHz
    nearest = float(np.min(np.abs(mu - freqs)))
    if nearest < resonance_guard_khz:
        raise SidebandResonanceError(
            f"beatnote {mu:.3f} kHz is within {nearest:.3f} kHz of a motional "
            f"sideband (guard {resonance_guard_khz} kHz)"
        )
    idx = np.arange(chain.n_ions) if modes is None else np.atleast_1d(modes)
    b = chain.mode_vectors[:, idx]
    denom = mu**2 - freqs[idx] ** 2
    values = drive.rabi_freq**2 * chain.recoil_freq * (b / denom) @ b.T
    values = np.triu(values, k=1)
    values = values + values.T
    if mu > np.max(freqs) and np.any(values[np.triu_indices(chain.n_ions, k=1)] <= 0):
        raise ValueError(
            "beatnote above the transverse band should give all-positive couplings; "
            "got a non-positive entry"
        )
    return _summarize(values)


def separation_averages(values: np.ndarray) -> np.ndarray:
    """Mean coupling at each lattice separation r = 1 .. n-1."""
    n = values.shape[0]
    return np.array(
        [np.mean(np.diagonal(values, offset=r)) for r in range(1, n)]
    )


def _fit_power_law_values(values: np.ndarray) -> tuple[float, float, float]:
    avg = separation_averages(values)
    if np.any(avg <= 0):
        raise PowerLawFitError(
            "averaged couplings must be positive at every separation for a "
            "log-log power-law fit"
        )
    n = values.shape[0]
    r = np.arange(1, n)
    # weight each separation by its pair multiplicity, so the fit is the
    # same as an unweighted fit over all individual pairs
    w = np.sqrt(n - r)
    slope, intercept = np.polyfit(np.log(r), np.log(avg), 1, w=w)
    resid = float(
        np.sqrt(np.mean((np.log(avg) - (slope * np.log(r) + intercept)) ** 2))
    )
    return float(np.exp(intercept)), float(-slope), resid


def fit_power_law(couplings: CouplingMatrix) -> tuple[float, float]:
    """Least-squares fit of the separation-averaged couplings to j0 / r^alpha.

    Averages all couplings at each separation, then fits a straight line in
    log-log space.  Requires at least two distinct separations and strictly
    positive averages.
    """
    if couplings.n < 3:
        raise ValueError("power-law fit needs at least 3 spins")
    j0, alpha, _ = _fit_power_law_values(couplings.values)
    return j0, alpha


def interaction_range(alpha: float) -> float:
    """Separation at which a 1/r^alpha coupling falls to 20% of nearest neighbor."""
    if alpha <= 0:
        raise ValueError(
            "interaction range diverges for alpha <= 0 (uniform couplings)"
        )
    if math.log(5.0) / alpha > 700.0:
        return math.inf
    return 5.0 ** (1.0 / alpha)


def synthetic_power_law(n: int, j0: float, alpha: float) -> CouplingMatrix:
    """Exact homogeneous power-law matrix j0 / |i-j|^alpha."""
    if n < 2:
        raise ValueError("need at least 2 spins")
    if j0 <= 0:
        raise ValueError("j0 must be positive")
    if alpha < 0:
        raise ValueError("alpha must be nonnegative")
    idx = np.arange(n)
    sep = np.abs(idx[:, None] - idx[None, :]).astype(float)
    np.fill_diagonal(sep, np.inf)
    values = j0 / sep**alpha
    np.fill_diagonal(values, 0.0)
    values = np.triu(values, k=1)
    values = values + values.T
    return _summarize(values)


def save_couplings_csv(couplings: CouplingMatrix, path) -> None:
    """Row-major CSV dump with a size/unit header comment."""
    with open(path, "w", newline="") as fh:
        fh.write(f"# n={couplings.n} units=kHz\n")
        writer = csv.writer(fh)
        for row in couplings.values:
            writer.writerow([repr(float(x)) for x in row])


def load_couplings_csv(path) -> CouplingMatrix:
    """Read a matrix written by :func:`save_couplings_csv`."""
    rows = []
    with open(path, newline="") as fh:
        for line in fh:
            if line.startswith("#") or not line.strip():
                continue
            rows.append([float(x) for x in line.strip().split(",")])
    values = np.array(rows, dtype=float)
    return _summarize(values)
