"""
Beam-pair sweeping, effective-channel estimation and estimation-error models.
"""

import logging
from dataclasses import dataclass
from typing import Tuple

import numpy as np
import scipy.linalg

from .channel import ChannelRealization
from .codebook import Codebook, Layout
from .transceiver import HwiConfig

logger = logging.getLogger(__name__)

LINKS = ("ND", "SI", "EN")


def _complex_normal(rng: np.random.Generator, shape, variance=1.0) -> np.ndarray:
    scale = np.sqrt(np.asarray(variance, dtype=float) / 2)
    return scale * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))


# ============================================================
# Pilots and estimates
# ============================================================

@dataclass(frozen=True)
class PilotBlock:
    """Per-subcarrier U x U pilots with S[k] S[k]^H = zeta I."""
    symbols: np.ndarray  # (K, U, U)
    zeta: float

    def __post_init__(self):
        S = np.asarray(self.symbols)
        if S.ndim != 3 or S.shape[1] != S.shape[2]:
            raise ValueError(f"pilot block must be (K, U, U), got {S.shape}")
        if self.zeta <= 0:
            raise ValueError(f"pilot power zeta must be positive, got {self.zeta}")
        gram = S @ S.conj().transpose(0, 2, 1)
        if not np.allclose(gram, self.zeta * np.eye(S.shape[1]), rtol=0, atol=1e-10 * self.zeta):
            raise ValueError("singular or non-orthogonal pilot block")

    @property
    def n_streams(self) -> int:
        return self.symbols.shape[1]

    @classmethod
    def dft(cls, K: int, U: int, zeta: float) -> "PilotBlock":
        """Scaled unitary DFT matrix on every subcarrier."""
        n = np.arange(U)
        F = np.exp(-2j * np.pi * np.outer(n, n) / U) / np.sqrt(U)
        return cls(symbols=np.broadcast_to(np.sqrt(zeta) * F, (K, U, U)).copy(), zeta=zeta)


@dataclass(frozen=True)
class LinkEstimate:
    channel: np.ndarray  # (K, U, U)
    error_variance: float
    link: str

    def __post_init__(self):
        if self.error_variance < 0:
            raise ValueError(f"error variance must be >= 0, got {self.error_variance}")
        if self.link not in LINKS:
            raise ValueError(f"unknown link {self.link!r}, expected one of {LINKS}")
        if np.asarray(self.channel).ndim != 3:
            raise ValueError("effective channel must be (K, U, U)")


# ============================================================
# Phase 1: beam-pair selection
# ============================================================

def beam_sweep_select(
    codebook_tx: Codebook,
    codebook_rx: Codebook,
    channel: ChannelRealization,
    pilots: PilotBlock,
    hwi: HwiConfig,
    noise_var: float,
    rng: np.random.Generator,
    noisy: bool = True,
) -> Tuple[int, int]:
    """
    Exhaustive sweep over (precoder p, combiner q) codeword pairs.

    Each pair sends the pilot block through H[k]; the pair with the largest
    received energy sum_k ||Y[k]||_F^2 wins. With `noisy`, Y carries transmit
    HWI, thermal noise after combining and receive HWI, drawn per pair and
    subcarrier. Ties go to the lowest (p, q).
    """
    if len(codebook_tx) == 0 or len(codebook_rx) == 0:
        raise ValueError("beam sweeping needs nonempty codebooks")

    F = codebook_tx.matrices()  # (P, n_t, U)
    W = codebook_rx.matrices()  # (Q, n_r, U)
    S = pilots.symbols
    U = pilots.n_streams
    per_entry = pilots.zeta / U
    combiner_gain = np.sum(np.abs(W) ** 2, axis=1)  # (Q, U) = ||w_i||^2

    power = np.zeros((len(F), len(W)))
    for k in range(channel.n_subcarriers):
        WH = np.einsum("qru,rt->qut", W.conj(), channel.per_subcarrier[k])
        A = WH[None, :, :, :] @ F[:, None, :, :]  # (P, Q, U, U)
        Y = A @ S[k]
        if noisy:
            row_gain = np.sum(np.abs(A) ** 2, axis=-1)  # (P, Q, U)
            thermal = noise_var * combiner_gain[None, :, :]
            rx_hwi = hwi.beta * ((1 + hwi.rho) * per_entry * row_gain + thermal)
            variance = hwi.rho * per_entry * row_gain + thermal + rx_hwi
            Y = Y + _complex_normal(rng, Y.shape, variance[..., None])
        power += np.sum(np.abs(Y) ** 2, axis=(-2, -1))

    p, q = np.unravel_index(int(np.argmax(power)), power.shape)
    logger.debug(f"[Sweep] selected pair (p={p}, q={q}) out of {power.size}")
    return int(p), int(q)


# ============================================================
# Phase 2: effective-channel estimation
# ============================================================

def transmit_pilots(
    h_eff: np.ndarray,
    pilots: PilotBlock,
    hwi: HwiConfig,
    noise_var: float,
    rng: np.random.Generator,
) -> np.ndarray:
    """
    Received pilots H(S + E) + N + G over the effective channel, shape
    (K, n_rf, U) for n_rf receive RF chains.
    """
    h_eff = np.asarray(h_eff)
    S = pilots.symbols
    per_entry = pilots.zeta / pilots.n_streams
    shape = h_eff.shape[:-1] + S.shape[-1:]
    E = _complex_normal(rng, S.shape, hwi.rho * per_entry)
    N = _complex_normal(rng, shape, noise_var)
    row_gain = np.sum(np.abs(h_eff) ** 2, axis=-1, keepdims=True)
    G = _complex_normal(rng, shape, hwi.beta * ((1 + hwi.rho) * per_entry * row_gain + noise_var))
    return h_eff @ (S + E) + N + G


def estimate_effective_channel(
    received: np.ndarray,
    pilots: PilotBlock,
    link: str = "ND",
    error_variance: float = 0.0,
) -> LinkEstimate:
    """LS estimate Y[k] S[k]^H / zeta."""
    received = np.asarray(received)
    S = pilots.symbols
    if received.ndim != 3 or received.shape[0] != S.shape[0] or received.shape[-1] != S.shape[-1]:
        raise ValueError(f"received pilots {received.shape} do not match pilot block {pilots.symbols.shape}")
    h_hat = received @ pilots.symbols.conj().transpose(0, 2, 1) / pilots.zeta
    return LinkEstimate(channel=h_hat, error_variance=error_variance, link=link)


def ls_error_variance(noise_var: float, zeta: float) -> float:
    """Per-entry LS error variance for orthogonal pilots of power zeta."""
    return noise_var / zeta


def inject_estimation_error(
    h_eff: np.ndarray,
    error_variance: float,
    rng: np.random.Generator,
    link: str = "ND",
) -> LinkEstimate:
    """H_hat = H_eff - Delta with i.i.d. CN(0, error_variance) entries."""
    if error_variance < 0:
        raise ValueError(f"error variance must be >= 0, got {error_variance}")
    h_eff = np.asarray(h_eff, dtype=complex)
    if error_variance == 0:
        return LinkEstimate(channel=h_eff.copy(), error_variance=0.0, link=link)
    delta = _complex_normal(rng, h_eff.shape, error_variance)
    return LinkEstimate(channel=h_eff - delta, error_variance=error_variance, link=link)


# ============================================================
# Infinite-resolution references
# ============================================================

def _dominant_phases(cov: np.ndarray, n_vectors: int = 1) -> np.ndarray:
    """Phases of the top eigenvectors (ties: first index), first entry rotated to 0."""
    w, V = scipy.linalg.eigh(cov)
    order = np.lexsort((np.arange(len(w)), -w))[:n_vectors]
    vectors = V[:, order]
    ref = np.angle(vectors[0:1, :])
    return np.exp(1j * (np.angle(vectors) - ref))


def ideal_rf_beamformer(channel: ChannelRealization, layout: Layout, side: str = "tx") -> np.ndarray:
    """
    Block-diagonal unit-modulus RF matrix from the dominant eigenvector of each
    subarray's sample covariance.
    """
    if side not in ("tx", "rx"):
        raise ValueError(f"side must be 'tx' or 'rx', got {side!r}")
    H = channel.per_subcarrier
    n = H.shape[2] if side == "tx" else H.shape[1]
    if n != layout.n_elements:
        raise ValueError(f"{side} side has {n} elements but layout expects {layout.n_elements}")

    phases = np.empty(layout.n_elements, dtype=complex)
    nb = layout.block_size
    for u in range(layout.n_blocks):
        block = slice(u * nb, (u + 1) * nb)
        if side == "tx":
            Hu = H[:, :, block]
            cov = np.einsum("krn,krm->nm", Hu.conj(), Hu)
        else:
            Hu = H[:, block, :]
            cov = np.einsum("knt,kmt->nm", Hu, Hu.conj())
        phases[block] = _dominant_phases(cov)[:, 0]
    return layout.expand(phases)


def fully_connected_rf_beamformer(channel: ChannelRealization, n_streams: int, side: str = "tx") -> np.ndarray:
    """Dense (N, U) unit-modulus RF matrix from the top eigenvectors of the full covariance."""
    if side not in ("tx", "rx"):
        raise ValueError(f"side must be 'tx' or 'rx', got {side!r}")
    H = channel.per_subcarrier
    if side == "tx":
        cov = np.einsum("krn,krm->nm", H.conj(), H)
    else:
        cov = np.einsum("knt,kmt->nm", H, H.conj())
    return _dominant_phases(cov, n_streams)
