"""Matrix-free transverse-field Ising operator and its low-lying spectrum.

State vectors live in the z-product basis: entry ``s`` of a ``2**n`` complex
array is the amplitude of the bitstring ``s`` with spin 1 as the most
significant bit, bit value 0 = down and 1 = up.  The operator is

    H = sum_{i<j} J_ij sx_i sx_j  -  B sum_i sy_i        (kHz)

with ``sx = [[0,1],[1,0]]`` and ``sy = [[0,-i],[i,0]]`` per spin.  Nothing
here materializes a 2**n x 2**n matrix; pair terms are bit flips and the
field term is a single bit flip with +/- i phases.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse.linalg

from .couplings import CouplingMatrix
from .errors import AmbiguousCouplingError, ConvergenceError

AFM = "afm"
FM = "fm"

MAX_CLASSICAL_SPINS = 24

#: threshold on |<excited| dH/dB |ground>| for counting a state as coupled
COUPLING_THRESHOLD = 1e-8

#: states within this many units of J0 of the branch energy count as one
#: degenerate manifold when measuring the gap; must sit above the splitting
#: scale at which the iterative eigensolver stops resolving sector-pure
#: vectors (stray elements scale like eps_machine * |H| / splitting)
DEGENERACY_TOL = 1e-6


@dataclass(frozen=True)
class IsingHamiltonian:
    """Couplings plus transverse field; ``sign`` flips every J for FM runs."""

    couplings: CouplingMatrix
    field: float  # kHz, may be negative
    sign: str = AFM

    def __post_init__(self):
        if self.sign not in (AFM, FM):
            raise ValueError(f"sign must be '{AFM}' or '{FM}'")

    @property
    def n(self) -> int:
        return self.couplings.n

    @property
    def j_values(self) -> np.ndarray:
        return self.couplings.values if self.sign == AFM else -self.couplings.values

    def norm_bound(self) -> float:
        """Cheap upper bound on the spectral norm, in kHz."""
        iu = np.triu_indices(self.n, k=1)
        return float(np.sum(np.abs(self.j_values[iu]))) + self.n * abs(self.field)


@dataclass(frozen=True)
class SpectrumScan:
    """Gap curve over a transverse-field grid, everything in units of J0."""

    b_grid: np.ndarray
    gaps: np.ndarray
    critical_field: float
    critical_gap: float

    def __post_init__(self):
        if np.any(self.gaps < 0):
            raise ValueError("gaps must be nonnegative")


def _pair_flip(psi_t: np.ndarray, i: int, j: int) -> np.ndarray:
    return np.flip(psi_t, axis=(i, j))


def apply_sigma_y_sum(state: np.ndarray, n: int | None = None) -> np.ndarray:
    """(sum_i sy_i) |state>, matrix-free."""
    if n is None:
        n = _infer_n(state)
    psi = state.reshape((2,) * n)
    out = np.zeros_like(psi)
    for i in range(n):
        lo = (slice(None),) * i + (0,)
        hi = (slice(None),) * i + (1,)
        out[hi] += 1j * psi[lo]
        out[lo] += -1j * psi[hi]
    return out.reshape(-1)


def _infer_n(state: np.ndarray) -> int:
    n = int(np.log2(state.size).round())
    if 2**n != state.size:
        raise ValueError(f"state length {state.size} is not a power of two")
    return n


def apply_hamiltonian(h: IsingHamiltonian, state: np.ndarray) -> np.ndarray:
    """H|state> in the z-product basis, without building H."""
    n = h.n
    if state.size != 2**n:
        raise ValueError(f"state has dimension {state.size}, expected {2**n}")
    psi = np.asarray(state, dtype=complex).reshape((2,) * n)
    out = np.zeros_like(psi)
    jm = h.j_values
    for i in range(n):
        for j in range(i + 1, n):
            if jm[i, j] != 0.0:
                out += jm[i, j] * _pair_flip(psi, i, j)
    if h.field != 0.0:
        out -= (h.field * apply_sigma_y_sum(state, n)).reshape((2,) * n)
    return out.reshape(-1)


def apply_global_flip(state: np.ndarray) -> np.ndarray:
    """Global pi rotation about y: prod_i (i sy_i) applied to the state."""
    n = _infer_n(state)
    idx = np.arange(2**n)
    phase = np.where(_popcount(idx, n) % 2 == 0, 1.0, -1.0)
    return phase * np.asarray(state)[2**n - 1 - idx]


def _popcount(idx: np.ndarray, n: int) -> np.ndarray:
    out = np.zeros_like(idx)
    for b in range(n):
        out += (idx >> b) & 1
    return out


def walsh_hadamard(state: np.ndarray) -> np.ndarray:
    """Orthonormal Walsh-Hadamard transform (its own inverse).

    Maps the z-product basis to the x-product basis, where the coupling part
    of H is diagonal.
    """
    n = _infer_n(state)
    psi = np.array(state, dtype=complex).reshape((2,) * n)
    inv_sqrt2 = 1.0 / np.sqrt(2.0)
    for i in range(n):
        lo = (slice(None),) * i + (0,)
        hi = (slice(None),) * i + (1,)
        a = psi[lo] + psi[hi]
        b = psi[lo] - psi[hi]
        psi[lo] = a * inv_sqrt2
        psi[hi] = b * inv_sqrt2
    return psi.reshape(-1)


def classical_energies(
    couplings: CouplingMatrix,
    sign: str = AFM,
    max_spins: int = MAX_CLASSICAL_SPINS,
) -> np.ndarray:
    """Zero-field energy of every bitstring, indexed in binary order.

    E(s) = sum_{i<j} J_ij x_i x_j with x read off the bits as +/-1
    (bit 1 -> +1).  Exact and fully vectorized; chunked so n up to
    ``max_spins`` stays within memory.
    """
    n = couplings.n
    if n > max_spins:
        raise ValueError(f"{n} spins exceeds the classical-energy cap of {max_spins}")
    jm = couplings.values if sign == AFM else -couplings.values
    energies = np.empty(2**n, dtype=float)
    chunk = 1 << min(n, 20)
    shifts = n - 1 - np.arange(n)  # spin i lives at bit n-1-i
    for start in range(0, 2**n, chunk):
        idx = np.arange(start, start + chunk, dtype=np.int64)
        x = (((idx[:, None] >> shifts[None, :]) & 1) * 2 - 1).astype(float)
        energies[start : start + chunk] = 0.5 * np.einsum("si,ij,sj->s", x, jm, x)
    return energies


def _xbasis_state_to_z(x_index: int, n: int) -> np.ndarray:
    """z-basis amplitudes of the x-product state labeled by ``x_index``.

    Under the Walsh-Hadamard convention used here, label bit 0 means spin
    along +x.  Components are 2^{-n/2} (-1)^{popcount(label AND z-index)}.
    """
    idx = np.arange(2**n)
    signs = 1.0 - 2.0 * (_popcount(idx & x_index, n) % 2)
    return signs / np.sqrt(2.0**n)


def lowest_eigenpairs(
    h: IsingHamiltonian, k: int, v0: np.ndarray | None = None
) -> tuple[np.ndarray, np.ndarray]:
    """k lowest eigenvalues (ascending) and orthonormal eigenvectors.

    At zero field the operator is diagonal in the x-product basis, so the
    answer is exact; otherwise a matrix-free Lanczos solve is used and the
    residuals are checked against the operator norm bound.
    """
    n = h.n
    dim = 2**n
    if k > dim:
        raise ValueError(f"asked for {k} pairs from a {dim}-dimensional space")
    if h.field == 0.0:
        energies = classical_energies(h.couplings, sign=h.sign)
        order = np.argsort(energies, kind="stable")[:k]
        vecs = np.column_stack([_xbasis_state_to_z(int(s), n) for s in order])
        return energies[order], vecs.astype(complex)
    if k > dim - 2 or dim <= 4:
        dense = np.column_stack(
            [apply_hamiltonian(h, e) for e in np.eye(dim, dtype=complex)]
        )
        vals, vecs = np.linalg.eigh(dense)
        return vals[:k], vecs[:, :k]
    op = scipy.sparse.linalg.LinearOperator(
        (dim, dim), matvec=lambda v: apply_hamiltonian(h, v), dtype=complex
    )
    try:
        vals, vecs = scipy.sparse.linalg.eigsh(op, k=k, which="SA", v0=v0)
    except scipy.sparse.linalg.ArpackNoConvergence as exc:
        raise ConvergenceError(
            f"eigensolver converged {len(exc.eigenvalues)}/{k} pairs"
        ) from exc
    order = np.argsort(vals, kind="stable")  # ARPACK does not guarantee order
    vals, vecs = vals[order], vecs[:, order]
    scale = max(h.norm_bound(), 1e-12)
    for col in range(k):
        resid = np.linalg.norm(apply_hamiltonian(h, vecs[:, col]) - vals[col] * vecs[:, col])
        if resid > 1e-8 * scale:
            raise ConvergenceError(
                f"eigenpair {col} residual {resid:.2e} exceeds 1e-8 * {scale:.2e}"
            )
    return vals, vecs


def _coupled_gap(
    h: IsingHamiltonian,
    vals: np.ndarray,
    vecs: np.ndarray,
    branch: np.ndarray,
    branch_energy: float,
    j0: float,
):
    """Distance from the branch state to the nearest coupled excited state.

    Coupling means a nonzero matrix element of dH/dB = -sum_i sy_i between
    the candidate and the branch state; members of the branch's degenerate
    manifold are skipped.
    """
    sy_branch = apply_sigma_y_sum(branch)
    candidates = []
    for col in range(len(vals)):
        if vals[col] <= branch_energy + DEGENERACY_TOL * j0:
            continue
        elem = abs(np.vdot(vecs[:, col], sy_branch))
        candidates.append((vals[col], elem))
        if elem > COUPLING_THRESHOLD:
            return vals[col] - branch_energy, candidates
    return None, candidates


def critical_gap_scan(
    couplings: CouplingMatrix,
    b_grid: np.ndarray | None = None,
    sign: str = AFM,
    k: int = 8,
) -> SpectrumScan:
    """Gap between the adiabatic ground branch and its first coupled excited
    state, on a grid of field values in units of the nearest-neighbor
    coupling.

    The branch is tracked by state overlap from the high-field end, where it
    is the unique paramagnetic ground state.  ``k`` sets the initial number
    of eigenpairs per grid point and is doubled automatically if no coupled
    state is found among them.
    """
    if b_grid is None:
        b_grid = np.logspace(np.log10(0.01), np.log10(5.0), 200)
    b_grid = np.sort(np.asarray(b_grid, dtype=float))
    j0 = couplings.nn_coupling
    n = couplings.n
    dim = 2**n
    gaps = np.empty_like(b_grid)
    branch = None
    for pos in range(len(b_grid) - 1, -1, -1):
        h = IsingHamiltonian(couplings, field=b_grid[pos] * j0, sign=sign)
        k_now = k
        while True:
            k_eff = min(k_now, dim - 2) if dim > 4 else dim
            vals, vecs = lowest_eigenpairs(
                h, k_eff, v0=None if branch is None else branch.copy()
            )
            if branch is None:
                branch_idx = 0
            else:
                branch_idx = int(np.argmax(np.abs(vecs.conj().T @ branch)))
            gap, candidates = _coupled_gap(
                h, vals, vecs, vecs[:, branch_idx], vals[branch_idx], j0
            )
            if gap is not None:
                break
            if k_eff >= min(dim, 64):
                detail = ", ".join(
                    f"E={e:.6g} |elem|={m:.2e}" for e, m in candidates
                )
                raise AmbiguousCouplingError(
                    f"no coupled excited state among {k_eff} pairs at "
                    f"B/J0={b_grid[pos]:.4g}: {detail}"
                )
            k_now *= 2
        gaps[pos] = gap / j0
        branch = vecs[:, branch_idx]
    arg = int(np.argmin(gaps))
    return SpectrumScan(
        b_grid=b_grid,
        gaps=gaps,
        critical_field=float(b_grid[arg]),
        critical_gap=float(gaps[arg]),
    )
