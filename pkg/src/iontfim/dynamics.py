"""Quench protocol: state preparation, ramped evolution, basis rotations.

The Schrodinger equation is integrated as i d|psi>/dt = 2*pi*H(t)|psi> with
frequencies in kHz and time in ms.  Internally the state is moved to the
x-product frame, where the coupling part of H is a precomputed diagonal and
only the transverse-field term needs bit flips; each step applies a
fourth-order commutator-free exponential propagator (two exponentials of
frozen field values at Gauss nodes), and each exponential is evaluated by an
adaptively truncated Taylor expansion.  Snapshots are returned in the
z-product basis.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .couplings import CouplingMatrix
from .errors import NormDriftError, StepUnderflowError
from .hamiltonian import (
    AFM,
    IsingHamiltonian,
    SpectrumScan,
    apply_sigma_y_sum,
    classical_energies,
    walsh_hadamard,
)

EXPONENTIAL_DOWN = "exponential_down"
EXPONENTIAL_DOWN_THEN_REVERSE = "exponential_down_then_reverse"

# Gauss-Legendre nodes and the fourth-order commutator-free weights
_CF4_NODE_LO = 0.5 - math.sqrt(3.0) / 6.0
_CF4_NODE_HI = 0.5 + math.sqrt(3.0) / 6.0
_CF4_W_BIG = 0.25 + math.sqrt(3.0) / 6.0
_CF4_W_SMALL = 0.25 - math.sqrt(3.0) / 6.0


@dataclass(frozen=True)
class RampSchedule:
    """Exponential transverse-field ramp, in units of the mean
    nearest-neighbor coupling.

    ``b_initial`` may be negative for runs that track the opposite end of
    the spectrum.  ``exponential_down_then_reverse`` retraces the down-ramp
    mirror-symmetrically over the second half of ``total_duration``.
    """

    time_constant_tau: float  # ms
    b_initial: float = 5.0
    total_duration: float | None = None  # ms, defaults to 6 tau
    shape: str = EXPONENTIAL_DOWN
    freeze_then_measure: bool = True

    def __post_init__(self):
        if self.time_constant_tau <= 0:
            raise ValueError("time_constant_tau must be positive")
        if self.b_initial == 0:
            raise ValueError("b_initial must be nonzero")
        if self.shape not in (EXPONENTIAL_DOWN, EXPONENTIAL_DOWN_THEN_REVERSE):
            raise ValueError(f"unknown ramp shape {self.shape!r}")
        if self.total_duration is None:
            object.__setattr__(self, "total_duration", 6.0 * self.time_constant_tau)
        if self.total_duration <= 0:
            raise ValueError("total_duration must be positive")

    @classmethod
    def down_to(cls, tau: float, b_initial: float = 5.0, b_final: float = 0.01):
        """Down-ramp that ends exactly at ``b_final`` (same units)."""
        duration = tau * math.log(abs(b_initial) / abs(b_final))
        return cls(time_constant_tau=tau, b_initial=b_initial, total_duration=duration)

    def b_of_t(self, t: float) -> float:
        """Field in units of the nearest-neighbor coupling at time t (ms)."""
        tau = self.time_constant_tau
        if self.shape == EXPONENTIAL_DOWN:
            return self.b_initial * math.exp(-t / tau)
        t_mirror = min(t, self.total_duration - t)
        return self.b_initial * math.exp(-t_mirror / tau)

    @property
    def b_minimum_time(self) -> float:
        if self.shape == EXPONENTIAL_DOWN:
            return self.total_duration
        return self.total_duration / 2.0

    @property
    def ramp_rate(self) -> float:
        """|d(log B)/dt| in 1/ms (equals kHz), constant for these shapes."""
        return 1.0 / self.time_constant_tau


@dataclass(frozen=True)
class StepControl:
    """Integrator knobs; defaults keep the phase per step at or below 0.1 rad."""

    max_phase: float = 0.1  # rad of 2*pi*|H|*dt per step
    taylor_tol: float = 1e-13
    taylor_max_terms: int = 40
    min_step: float = 1e-9  # ms
    norm_tol: float = 1e-6


@dataclass(frozen=True)
class Trajectory:
    times: np.ndarray  # ms
    states: list  # z-basis snapshots, aligned with times
    b_values: np.ndarray  # field at each snapshot, in J0 units
    schedule: RampSchedule
    n_steps: int
    max_norm_drift: float

    @property
    def final_state(self) -> np.ndarray:
        return self.states[-1]


def prepare_initial_state(n: int, direction: str = "+y") -> np.ndarray:
    """Product state of all spins along +y or -y.

    Each spin is (|down> + i|up*sgn>)/sqrt(2); amplitudes over bitstrings
    follow from the popcount.
    """
    if n < 1:
        raise ValueError("need at least one spin")
    if direction not in ("+y", "-y"):
        raise ValueError("direction must be '+y' or '-y'")
    unit = 1j if direction == "+y" else -1j
    idx = np.arange(2**n)
    pops = np.zeros(2**n, dtype=np.int64)
    for b in range(n):
        pops += (idx >> b) & 1
    return (unit**pops) / math.sqrt(2.0**n)


_ROTATIONS = {
    # rows are <0_out| and <1_out|; bit 1 after rotation means spin up
    # along the measured axis
    "x": np.array([[1.0, -1.0], [1.0, 1.0]], dtype=complex) / math.sqrt(2.0),
    "y": np.array([[1.0, 1.0j], [1.0, -1.0j]], dtype=complex) / math.sqrt(2.0),
}


def rotate_measurement_basis(
    state: np.ndarray, axis: str, inverse: bool = False
) -> np.ndarray:
    """Map the requested spin axis onto z so plain bit sampling measures it.

    ``axis='z'`` is the identity.  With ``inverse=True`` the conjugate
    rotation is applied, undoing a previous call.
    """
    if axis == "z":
        return np.array(state, dtype=complex)
    try:
        mat = _ROTATIONS[axis]
    except KeyError:
        raise ValueError(f"axis must be one of x, y, z, got {axis!r}") from None
    if inverse:
        mat = mat.conj().T
    n = int(round(math.log2(state.size)))
    psi = np.asarray(state, dtype=complex).reshape((2,) * n)
    for i in range(n):
        psi = np.tensordot(mat, psi, axes=([1], [i])).transpose(
            *range(1, i + 1), 0, *range(i + 1, n)
        )
    return psi.reshape(-1)


def sigma_y_total_expectation(state: np.ndarray) -> float:
    """<sum_i sy_i> of a normalized z-basis state."""
    return float(np.real(np.vdot(state, apply_sigma_y_sum(state))))


class _XFrameGenerator:
    """Applies c_j * (coupling diagonal) + c_b * (sum_i sy_i) in the x frame."""

    def __init__(self, diag: np.ndarray, n: int):
        self.diag = diag
        self.n = n

    def apply(self, psi: np.ndarray, c_j: float, c_b: float) -> np.ndarray:
        out = (c_j * self.diag) * psi
        if c_b != 0.0:
            t = psi.reshape((2,) * self.n)
            o = out.reshape((2,) * self.n)
            for i in range(self.n):
                lo = (slice(None),) * i + (0,)
                hi = (slice(None),) * i + (1,)
                o[hi] += (1j * c_b) * t[lo]
                o[lo] += (-1j * c_b) * t[hi]
        return out


def _taylor_expm(gen: _XFrameGenerator, psi: np.ndarray, dt: float,
                 c_j: float, c_b: float, control: StepControl) -> np.ndarray:
    """exp(-2*pi*i*dt*(c_j*D + c_b*Y)) |psi| via adaptive Taylor series."""
    scale = -2j * math.pi * dt
    out = psi.copy()
    term = psi
    ref = float(np.linalg.norm(psi))
    for k in range(1, control.taylor_max_terms + 1):
        term = (scale / k) * gen.apply(term, c_j, c_b)
        out += term
        if float(np.linalg.norm(term)) < control.taylor_tol * ref:
            return out
    raise StepUnderflowError(
        f"propagator Taylor series failed to converge in "
        f"{control.taylor_max_terms} terms (phase too large for one step)"
    )


def evolve(
    state: np.ndarray,
    couplings: CouplingMatrix,
    schedule: RampSchedule,
    step_control: StepControl | None = None,
    sign: str = AFM,
    snapshot_times=None,
) -> Trajectory:
    """Integrate the ramped-field evolution and return z-basis snapshots.

    Snapshots always include t=0, the field minimum, and the final time;
    ``snapshot_times`` adds more.  Norm drift beyond the step-control
    tolerance raises rather than silently renormalizing.
    """
    control = step_control or StepControl()
    n = couplings.n
    if state.size != 2**n:
        raise ValueError(f"state has dimension {state.size}, expected {2**n}")
    j0 = couplings.nn_coupling
    iu = np.triu_indices(n, k=1)
    j_sum = float(np.sum(np.abs(couplings.values[iu])))
    diag = classical_energies(couplings, sign=sign)

    marks = {0.0, schedule.b_minimum_time, schedule.total_duration}
    if snapshot_times is not None:
        for t in snapshot_times:
            if not 0.0 <= t <= schedule.total_duration + 1e-12:
                raise ValueError(f"snapshot time {t} outside the schedule")
            marks.add(float(t))
    marks = sorted(marks)

    gen = _XFrameGenerator(diag, n)
    psi = walsh_hadamard(state)
    times, states, b_vals = [0.0], [np.array(state, dtype=complex)], [schedule.b_of_t(0.0)]
    n_steps = 0
    max_drift = abs(float(np.linalg.norm(psi)) - 1.0)

    def omega(t):  # rad/ms bound on the spectral norm
        return 2.0 * math.pi * (j_sum + n * abs(schedule.b_of_t(t)) * j0)

    t = 0.0
    for t_target in marks[1:]:
        while t < t_target - 1e-15:
            dt = min(control.max_phase / max(omega(t), 1e-30), t_target - t)
            dt = min(dt, control.max_phase / max(omega(t + dt), 1e-30))
            if dt < control.min_step and t + dt < t_target - 1e-15:
                raise StepUnderflowError(
                    f"required step {dt:.3e} ms below the {control.min_step} ms floor"
                )
            b1 = schedule.b_of_t(t + _CF4_NODE_LO * dt) * j0
            b2 = schedule.b_of_t(t + _CF4_NODE_HI * dt) * j0
            psi = _taylor_expm(
                gen, psi, dt, 0.5, _CF4_W_BIG * b1 + _CF4_W_SMALL * b2, control
            )
            psi = _taylor_expm(
                gen, psi, dt, 0.5, _CF4_W_SMALL * b1 + _CF4_W_BIG * b2, control
            )
            t += dt
            n_steps += 1
        t = t_target
        drift = abs(float(np.linalg.norm(psi)) - 1.0)
        max_drift = max(max_drift, drift)
        if drift > control.norm_tol:
            raise NormDriftError(
                f"norm drifted by {drift:.2e} at t={t:.4f} ms "
                f"(tolerance {control.norm_tol})"
            )
        times.append(t)
        states.append(walsh_hadamard(psi))
        b_vals.append(schedule.b_of_t(t))
    return Trajectory(
        times=np.array(times),
        states=states,
        b_values=np.array(b_vals),
        schedule=schedule,
        n_steps=n_steps,
        max_norm_drift=max_drift,
    )


@dataclass(frozen=True)
class AdiabaticityReport:
    ramp_rate_khz: float
    critical_gap_khz: float
    label: str  # "quench" or "quasi-adiabatic"


def adiabaticity_diagnostic(
    schedule: RampSchedule, scan: SpectrumScan, j0_khz: float
) -> AdiabaticityReport:
    """Compare the exponential ramp rate |dB/dt| / B = 1/tau against the
    critical gap, both in ordinary-frequency kHz."""
    rate = schedule.ramp_rate
    gap = scan.critical_gap * j0_khz
    label = "quench" if rate > gap else "quasi-adiabatic"
    return AdiabaticityReport(ramp_rate_khz=rate, critical_gap_khz=gap, label=label)
