"""Projective sampling, the per-spin detection-error channel, and its inverse.

The channel acts independently on each spin: a spin is read correctly with
probability epsilon, flipped otherwise.  Over bitstrings this is the tensor
power of a 2x2 stochastic matrix, so both the forward map and its inverse
are applied in O(n * 2**n) without ever building the 2**n x 2**n matrix.
An asymmetric pair (epsilon_dark, epsilon_bright) is accepted wherever a
single efficiency is.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DetectionInversionError

RAW = "raw"
OBSERVED = "observed"
DECONVOLVED = "deconvolved"

EXACT = "exact"
SAMPLED = "sampled"


def _epsilon_pair(epsilon) -> tuple[float, float]:
    if np.isscalar(epsilon):
        return float(epsilon), float(epsilon)
    dark, bright = epsilon
    return float(dark), float(bright)


@dataclass(frozen=True)
class SampleSet:
    """Counted measurement records in one basis.

    ``counts`` maps bitstring index to shot count.  ``epsilon`` records the
    per-spin efficiency of the channel the samples passed through (1 for
    ideal Born samples).
    """

    basis: str
    n: int
    counts: dict
    total_shots: int
    epsilon: float | tuple = 1.0

    def __post_init__(self):
        if self.basis not in ("x", "y", "z"):
            raise ValueError(f"basis must be x, y or z, got {self.basis!r}")
        if self.total_shots < 1:
            raise ValueError("total_shots must be at least 1")
        if sum(self.counts.values()) != self.total_shots:
            raise ValueError("counts must sum to total_shots")
        dim = 2**self.n
        for idx, c in self.counts.items():
            if not 0 <= idx < dim:
                raise ValueError(f"bitstring index {idx} out of range for n={self.n}")
            if c < 0:
                raise ValueError("counts must be nonnegative")

    def indices_and_weights(self) -> tuple[np.ndarray, np.ndarray]:
        idx = np.fromiter(self.counts.keys(), dtype=np.int64, count=len(self.counts))
        w = np.fromiter(self.counts.values(), dtype=float, count=len(self.counts))
        return idx, w / self.total_shots

    def to_distribution(self, kind: str = OBSERVED) -> "ProbabilityDistribution":
        values = np.zeros(2**self.n)
        for idx, c in self.counts.items():
            values[idx] = c / self.total_shots
        return ProbabilityDistribution(values=values, kind=kind, n=self.n)

    def expanded(self) -> np.ndarray:
        """Per-shot bitstring indices (order is by index, not draw order)."""
        idx, _ = self.indices_and_weights()
        reps = np.fromiter(self.counts.values(), dtype=np.int64, count=len(self.counts))
        return np.repeat(idx, reps)


@dataclass(frozen=True)
class ProbabilityDistribution:
    """Distribution over bitstrings; deconvolved ones may dip below zero."""

    values: np.ndarray
    kind: str
    n: int

    def __post_init__(self):
        if self.kind not in (RAW, OBSERVED, DECONVOLVED):
            raise ValueError(f"unknown kind {self.kind!r}")
        if self.values.shape != (2**self.n,):
            raise ValueError("values must have length 2**n")
        total = float(np.sum(self.values))
        if abs(total - 1.0) > 1e-9:
            raise ValueError(f"probabilities sum to {total}, not 1")
        if self.kind != DECONVOLVED and float(np.min(self.values)) < -1e-12:
            raise ValueError(f"{self.kind} distribution has negative entries")

    @property
    def negative_count(self) -> int:
        return int(np.sum(self.values < 0))

    @property
    def min_entry(self) -> float:
        return float(np.min(self.values))


def sample(state: np.ndarray, shots: int, seed, basis: str = "z") -> SampleSet:
    """Draw i.i.d. bitstrings from |amplitude|^2 of an already-rotated state."""
    if shots < 1:
        raise ValueError("shots must be at least 1")
    probs = np.abs(np.asarray(state)) ** 2
    probs = probs / probs.sum()
    n = int(round(np.log2(len(probs))))
    rng = np.random.default_rng(seed)
    draws = rng.choice(len(probs), size=shots, p=probs)
    uniq, cnt = np.unique(draws, return_counts=True)
    counts = {int(u): int(c) for u, c in zip(uniq, cnt)}
    return SampleSet(basis=basis, n=n, counts=counts, total_shots=shots, epsilon=1.0)


def confusion_matrix_entry(i: int, j: int, epsilon: float, n: int) -> float:
    """Probability of reading bitstring i when the register holds j."""
    if not 0.5 < epsilon <= 1.0:
        raise ValueError("epsilon must be in (0.5, 1]")
    beta = bin(i ^ j).count("1")
    return (1.0 - epsilon) ** beta * epsilon ** (n - beta)


def _apply_channel_matrix(values: np.ndarray, n: int, m: np.ndarray) -> np.ndarray:
    """Contract a 2x2 matrix against every spin axis of a length-2**n vector."""
    out = values.reshape((2,) * n).astype(float, copy=True)
    for i in range(n):
        lo = (slice(None),) * i + (0,)
        hi = (slice(None),) * i + (1,)
        a = m[0, 0] * out[lo] + m[0, 1] * out[hi]
        b = m[1, 0] * out[lo] + m[1, 1] * out[hi]
        out[lo] = a
        out[hi] = b
    return out.reshape(-1)


def apply_detection_error(
    data, epsilon, mode: str = EXACT, seed=None
):
    """Push a distribution (exact) or per-shot records (sampled) through the
    per-spin readout channel.

    Exact mode returns an ``observed`` ProbabilityDistribution computed via
    the per-spin product structure; a SampleSet input is first converted to
    its empirical distribution.  Sampled mode flips each bit of each shot
    independently and returns a new SampleSet.
    """
    eps_dark, eps_bright = _epsilon_pair(epsilon)
    for e in (eps_dark, eps_bright):
        if not 0.0 <= e <= 1.0:
            raise ValueError("efficiencies must be within [0, 1]")
    if mode == EXACT:
        if isinstance(data, SampleSet):
            dist = data.to_distribution(kind=RAW)
        elif isinstance(data, ProbabilityDistribution):
            dist = data
        else:
            raise TypeError("exact mode needs a ProbabilityDistribution or SampleSet")
        m = np.array(
            [[eps_dark, 1.0 - eps_bright], [1.0 - eps_dark, eps_bright]]
        )
        values = _apply_channel_matrix(dist.values, dist.n, m)
        return ProbabilityDistribution(values=values, kind=OBSERVED, n=dist.n)
    if mode == SAMPLED:
        if not isinstance(data, SampleSet):
            raise TypeError("sampled mode needs a SampleSet")
        rng = np.random.default_rng(seed)
        shots_idx = data.expanded()
        n = data.n
        bits = (shots_idx[:, None] >> (n - 1 - np.arange(n))[None, :]) & 1
        u = rng.random(bits.shape)
        flip = np.where(bits == 1, u > eps_bright, u > eps_dark)
        noisy_bits = bits ^ flip
        weights = 1 << (n - 1 - np.arange(n, dtype=np.int64))
        noisy_idx = noisy_bits @ weights
        uniq, cnt = np.unique(noisy_idx, return_counts=True)
        return SampleSet(
            basis=data.basis,
            n=n,
            counts={int(i): int(c) for i, c in zip(uniq, cnt)},
            total_shots=data.total_shots,
            epsilon=epsilon if np.isscalar(epsilon) else (eps_dark, eps_bright),
        )
    raise ValueError(f"mode must be '{EXACT}' or '{SAMPLED}', got {mode!r}")


def deconvolve(observed: ProbabilityDistribution, epsilon) -> ProbabilityDistribution:
    """Invert the readout channel on a probability vector.

    The inverse factorizes over spins, so this is O(n * 2**n) as well.  The
    result sums to one but individual entries may be slightly negative; they
    are kept as-is so downstream moments stay unbiased.
    """
    eps_dark, eps_bright = _epsilon_pair(epsilon)
    det = eps_dark + eps_bright - 1.0
    if det <= 0.0:
        raise DetectionInversionError(
            f"per-spin channel with efficiencies ({eps_dark}, {eps_bright}) "
            "is not invertible"
        )
    m_inv = (
        np.array([[eps_bright, eps_bright - 1.0], [eps_dark - 1.0, eps_dark]]) / det
    )
    values = _apply_channel_matrix(observed.values, observed.n, m_inv)
    return ProbabilityDistribution(values=values, kind=DECONVOLVED, n=observed.n)
