"""
RF codebooks for subarray hybrid beamforming.

Matrix codewords are block-diagonal with U unit-modulus blocks of size
(N/U) x 1. Since every row holds exactly one nonzero entry, codewords are
stored compactly as length-N phase vectors and expanded on demand.
"""

import itertools
import logging
from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np

logger = logging.getLogger(__name__)

# ---- LBG defaults ----
DEFAULT_EPSILON = 1e-3
DEFAULT_ITERATIONS = 50
DEFAULT_TRAINING_SIZE = 4096


# ============================================================
# Layout and codewords
# ============================================================

@dataclass(frozen=True)
class Layout:
    """N antenna elements driven by U RF chains, one contiguous block each."""
    n_elements: int
    n_blocks: int

    def __post_init__(self):
        if self.n_blocks < 1 or self.n_elements < self.n_blocks or self.n_elements % self.n_blocks:
            raise ValueError(f"cannot split {self.n_elements} elements into {self.n_blocks} equal blocks")

    @property
    def block_size(self) -> int:
        return self.n_elements // self.n_blocks

    def support(self) -> np.ndarray:
        """(N, U) boolean mask of the block-diagonal support."""
        mask = np.zeros((self.n_elements, self.n_blocks), dtype=bool)
        mask[np.arange(self.n_elements), np.arange(self.n_elements) // self.block_size] = True
        return mask

    def expand(self, phases: np.ndarray) -> np.ndarray:
        """Compact (..., N) vectors to (..., N, U) block-diagonal matrices."""
        phases = np.asarray(phases)
        return phases[..., :, None] * self.support()

    def compress(self, matrices: np.ndarray) -> np.ndarray:
        """On-support entries of (..., N, U) matrices as (..., N) vectors."""
        matrices = np.asarray(matrices)
        if matrices.shape[-2:] != (self.n_elements, self.n_blocks):
            raise ValueError(
                f"expected (..., {self.n_elements}, {self.n_blocks}) matrices, got {matrices.shape}"
            )
        return np.where(self.support(), matrices, 0).sum(axis=-1)


@dataclass(frozen=True)
class Codeword:
    matrix: np.ndarray
    support: np.ndarray

    def __post_init__(self):
        on = self.matrix[self.support]
        if not np.allclose(np.abs(on), 1.0, atol=1e-12):
            raise ValueError("codeword entries on the support must have unit modulus")
        if np.any(self.matrix[~self.support] != 0):
            raise ValueError("codeword entries off the support must be exactly zero")


@dataclass(frozen=True)
class Codebook:
    bits: int
    entries: np.ndarray  # (2^B, N) compact phase vectors
    layout: Layout

    def __post_init__(self):
        entries = np.asarray(self.entries, dtype=complex)
        if entries.shape != (2 ** self.bits, self.layout.n_elements):
            raise ValueError(
                f"a {self.bits}-bit codebook needs {2 ** self.bits} entries of length "
                f"{self.layout.n_elements}, got {entries.shape}"
            )
        entries = entries.copy()
        entries.flags.writeable = False
        object.__setattr__(self, "entries", entries)

    def __len__(self) -> int:
        return self.entries.shape[0]

    def matrices(self) -> np.ndarray:
        return self.layout.expand(self.entries)

    def codeword(self, index: int) -> Codeword:
        return Codeword(matrix=self.layout.expand(self.entries[index]), support=self.layout.support())


@dataclass(frozen=True)
class LbgConfig:
    epsilon: float = DEFAULT_EPSILON
    iterations: int = DEFAULT_ITERATIONS
    training_size: int = DEFAULT_TRAINING_SIZE
    seed: Optional[int] = None

    def __post_init__(self):
        if not 0 < self.epsilon < 0.1:
            raise ValueError(f"split perturbation must lie in (0, 0.1), got {self.epsilon}")
        if self.iterations < 1:
            raise ValueError(f"need at least one inner iteration, got {self.iterations}")
        if self.training_size < 1:
            raise ValueError(f"training set must be nonempty, got {self.training_size}")


# ============================================================
# Distances
# ============================================================

def matrix_distance(X: np.ndarray, Y: np.ndarray) -> float:
    """Mean squared modulus of the entrywise difference."""
    X = np.asarray(X)
    Y = np.asarray(Y)
    if X.shape != Y.shape:
        raise ValueError(f"shape mismatch: {X.shape} vs {Y.shape}")
    return float(np.mean(np.abs(X - Y) ** 2))


def _pairwise_distances(training: np.ndarray, entries: np.ndarray, layout: Layout) -> np.ndarray:
    """d(F_t, C_c) for compact vectors, shape (T, C)."""
    cross = np.real(training @ entries.conj().T)
    sq_t = np.sum(np.abs(training) ** 2, axis=1)[:, None]
    sq_c = np.sum(np.abs(entries) ** 2, axis=1)[None, :]
    return np.maximum(sq_t + sq_c - 2 * cross, 0.0) / (layout.n_elements * layout.n_blocks)


# ============================================================
# Modified LBG steps
# ============================================================

def random_phase_training(layout: Layout, size: int, rng: np.random.Generator) -> np.ndarray:
    """Training set of angles of complex Gaussian numbers, compact (T, N)."""
    g = rng.standard_normal((size, layout.n_elements)) + 1j * rng.standard_normal((size, layout.n_elements))
    return np.exp(1j * np.angle(g))


def lbg_init(training: np.ndarray) -> np.ndarray:
    training = np.asarray(training)
    if training.shape[0] == 0:
        raise ValueError("cannot initialise a codebook from an empty training set")
    return np.exp(1j * np.angle(training.mean(axis=0)))


def lbg_split(entries: np.ndarray, rng: np.random.Generator, epsilon: float = DEFAULT_EPSILON) -> np.ndarray:
    """
    Doubles the codebook: children exp(j arg(sqrt(1-eps^2) C +/- eps P)).

    Output order is all '+' children, then all '-' children.
    """
    entries = np.asarray(entries)
    P = np.exp(1j * np.angle(rng.standard_normal(entries.shape) + 1j * rng.standard_normal(entries.shape)))
    base = np.sqrt(1 - epsilon ** 2) * entries
    plus = np.exp(1j * np.angle(base + epsilon * P))
    minus = np.exp(1j * np.angle(base - epsilon * P))
    return np.concatenate([plus, minus], axis=0)


def lbg_assign(training: np.ndarray, entries: np.ndarray, layout: Layout) -> np.ndarray:
    """Nearest codeword per training entry (0-based); ties go to the lowest index."""
    if len(entries) == 0:
        raise ValueError("cannot assign against an empty codebook")
    return np.argmin(_pairwise_distances(training, entries, layout), axis=1)


def lbg_update(
    training: np.ndarray,
    labels: np.ndarray,
    n_codewords: int,
    rng: np.random.Generator,
) -> np.ndarray:
    """Phase-of-mean centroids; an empty cluster is re-seeded from a random training member."""
    onehot = np.zeros((n_codewords, training.shape[0]))
    onehot[labels, np.arange(training.shape[0])] = 1.0
    sums = onehot @ training
    centroids = np.exp(1j * np.angle(sums))

    empty = np.flatnonzero(onehot.sum(axis=1) == 0)
    for c in empty:
        centroids[c] = training[rng.integers(training.shape[0])]
    if empty.size:
        logger.debug(f"[LBG] re-seeded {empty.size} empty cluster(s)")
    return centroids


def total_distortion(training: np.ndarray, entries: np.ndarray, labels: np.ndarray, layout: Layout) -> float:
    diff = training - entries[labels]
    return float(np.sum(np.abs(diff) ** 2) / (layout.n_elements * layout.n_blocks))


def train_codebook(
    cfg: LbgConfig,
    layout: Layout,
    bits: int,
    rng: np.random.Generator,
    training: Optional[np.ndarray] = None,
    trace: Optional[List[Tuple[int, int, float]]] = None,
) -> Codebook:
    """
    Modified MSE-based LBG.

    Args:
        training: compact (T, N) training set; drawn from `rng` when None
        trace: if given, receives (bits, iteration, total distortion) after
            every inner update
    """
    if bits < 0:
        raise ValueError(f"bits must be >= 0, got {bits}")
    if training is None:
        training = random_phase_training(layout, cfg.training_size, rng)
    training = np.asarray(training, dtype=complex)
    if training.ndim != 2 or training.shape[1] != layout.n_elements:
        raise ValueError(f"training set must be (T, {layout.n_elements}), got {training.shape}")
    if training.shape[0] < 2 ** bits:
        raise ValueError(f"training size {training.shape[0]} is smaller than 2^{bits} codewords")

    entries = lbg_init(training)[None, :]
    for b in range(1, bits + 1):
        entries = lbg_split(entries, rng, cfg.epsilon)
        for v in range(cfg.iterations):
            labels = lbg_assign(training, entries, layout)
            entries = lbg_update(training, labels, len(entries), rng)
            if trace is not None:
                trace.append((b, v, total_distortion(training, entries, labels, layout)))
    logger.info(f"[LBG] trained {bits}-bit codebook for N={layout.n_elements}, U={layout.n_blocks}")
    return Codebook(bits=bits, entries=entries, layout=layout)


# ============================================================
# Quantization
# ============================================================

def quantize(codebook: Codebook, X: np.ndarray) -> Tuple[int, np.ndarray]:
    """Nearest codeword to the (N, U) matrix X; returns (index, codeword matrix)."""
    x = codebook.layout.compress(X)[None, :]
    index = int(lbg_assign(x, codebook.entries, codebook.layout)[0])
    return index, codebook.layout.expand(codebook.entries[index])


def mean_distortion(codebook: Codebook, test_set: np.ndarray) -> float:
    """Average d(X, quantize(X)) over a compact (T, N) set."""
    d = _pairwise_distances(np.asarray(test_set), codebook.entries, codebook.layout)
    return float(d.min(axis=1).mean())


# ============================================================
# Vector-wise baseline
# ============================================================

@dataclass(frozen=True)
class VectorCodebook:
    """b-bit per-subarray codebook, applied independently to each of the U blocks."""
    bits: int
    entries: np.ndarray  # (2^b, N/U)
    layout: Layout

    @property
    def block_layout(self) -> Layout:
        return Layout(self.layout.block_size, 1)

    @property
    def n_candidates(self) -> int:
        return len(self.entries) ** self.layout.n_blocks

    def quantize(self, X: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """Per-block nearest vectors; returns (U indices, (N, U) matrix)."""
        blocks = self.layout.compress(X).reshape(self.layout.n_blocks, self.layout.block_size)
        indices = lbg_assign(blocks, self.entries, self.block_layout)
        return indices, self.layout.expand(self.entries[indices].ravel())

    def mean_distortion(self, test_set: np.ndarray) -> float:
        test_set = np.asarray(test_set)
        T, U = test_set.shape[0], self.layout.n_blocks
        blocks = test_set.reshape(T * U, self.layout.block_size)
        d = _pairwise_distances(blocks, self.entries, self.block_layout).min(axis=1)
        # block distances are means over n_b entries; the matrix distance averages N*U entries
        return float(d.reshape(T, U).sum(axis=1).mean() / U ** 2)

    def as_matrix_codebook(self) -> Codebook:
        """All 2^(Ub) block combinations, block 0 most significant."""
        combos = itertools.product(range(len(self.entries)), repeat=self.layout.n_blocks)
        entries = np.array([self.entries[list(c)].ravel() for c in combos])
        return Codebook(bits=self.bits * self.layout.n_blocks, entries=entries, layout=self.layout)


def train_vector_codebook_baseline(
    cfg: LbgConfig,
    layout: Layout,
    bits: int,
    rng: np.random.Generator,
    training: Optional[np.ndarray] = None,
) -> VectorCodebook:
    """
    Conventional LBG on per-subarray vectors.

    A shared compact (T, N) training set is split into its T*U subarray
    vectors so matrix and vector codebooks can be compared on the same data.
    """
    block_layout = Layout(layout.block_size, 1)
    if training is None:
        vectors = random_phase_training(block_layout, cfg.training_size, rng)
    else:
        training = np.asarray(training)
        vectors = training.reshape(training.shape[0] * layout.n_blocks, layout.block_size)
    book = train_codebook(cfg, block_layout, bits, rng, training=vectors)
    return VectorCodebook(bits=bits, entries=book.entries, layout=layout)
