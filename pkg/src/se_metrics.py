"""
Spectral efficiency of the backhaul and access links, IBFD and HD.
"""

import logging
from dataclasses import dataclass
from typing import Optional, Sequence, Union

import numpy as np
import scipy.linalg

from .transceiver import AccessCovariances, BackhaulCovariances

logger = logging.getLogger(__name__)

HD_SCALE = 0.5


@dataclass(frozen=True)
class SeResult:
    per_subcarrier: np.ndarray  # bits/s/Hz
    link: str
    mode: str

    def __post_init__(self):
        if self.link not in ("backhaul", "access-sum"):
            raise ValueError(f"unknown link {self.link!r}")
        if self.mode not in ("IBFD", "HD"):
            raise ValueError(f"unknown duplex mode {self.mode!r}")
        se = np.asarray(self.per_subcarrier, dtype=float)
        if np.any(se < 0):
            raise ValueError("spectral efficiency must be nonnegative")
        object.__setattr__(self, "per_subcarrier", se)

    @property
    def mean(self) -> float:
        return float(np.mean(self.per_subcarrier))


def _log2det_ratio(A: np.ndarray, B: np.ndarray, k: int) -> float:
    """log2 det(I + A B^-1) for Hermitian PSD A and PD B, via B = L L^H."""
    B = 0.5 * (B + B.conj().T)
    try:
        L = scipy.linalg.cholesky(B, lower=True)
    except (np.linalg.LinAlgError, scipy.linalg.LinAlgError) as e:
        raise ValueError(f"W^H Omega W is singular on subcarrier {k}") from e
    M = scipy.linalg.solve_triangular(L, A, lower=True)
    M = scipy.linalg.solve_triangular(L, M.conj().T, lower=True).conj().T
    eig = np.linalg.eigvalsh(0.5 * (M + M.conj().T))
    return float(np.sum(np.log2(1.0 + np.maximum(eig, 0.0))))


def backhaul_se(
    phi: np.ndarray,
    omega: np.ndarray,
    w_bbn: Optional[np.ndarray] = None,
    mode: str = "IBFD",
) -> SeResult:
    """
    R_b = (1/K) sum_k log2 det(I + (W^H Phi W)(W^H Omega W)^-1).

    Without a combiner the identity is used; the value is the same for any
    full-rank W.
    """
    phi = np.asarray(phi)
    omega = np.asarray(omega)
    K = phi.shape[0]
    per_k = np.empty(K)
    for k in range(K):
        if w_bbn is None:
            A, B = phi[k], omega[k]
        else:
            W = w_bbn[k]
            A = W.conj().T @ phi[k] @ W
            B = W.conj().T @ omega[k] @ W
        per_k[k] = _log2det_ratio(A, B, k)
    return SeResult(per_subcarrier=per_k, link="backhaul", mode=mode)


def access_sum_se(phi: np.ndarray, omega: np.ndarray, mode: str = "IBFD") -> SeResult:
    """R_a = sum_u (1/K) sum_k log2(1 + Phi_u[k] / Omega_u[k]); inputs (K, U)."""
    phi = np.asarray(phi, dtype=float)
    omega = np.asarray(omega, dtype=float)
    if np.any(omega <= 0):
        raise ValueError("access impairment power Omega must be positive for every user")
    per_k = np.sum(np.log2(1.0 + phi / omega), axis=-1)
    return SeResult(per_subcarrier=per_k, link="access-sum", mode=mode)


def hd_baseline(
    covariances: Union[BackhaulCovariances, AccessCovariances],
    w_bbn: Optional[np.ndarray] = None,
) -> SeResult:
    """Half-duplex reference: SI terms removed, SE scaled by 0.5."""
    if isinstance(covariances, BackhaulCovariances):
        full = backhaul_se(covariances.phi, covariances.omega_hd, w_bbn)
        return SeResult(per_subcarrier=HD_SCALE * full.per_subcarrier, link="backhaul", mode="HD")
    if isinstance(covariances, AccessCovariances):
        # the access link carries no SI term
        full = access_sum_se(covariances.phi, covariances.omega)
        return SeResult(per_subcarrier=HD_SCALE * full.per_subcarrier, link="access-sum", mode="HD")
    raise TypeError(f"unsupported covariance bundle {type(covariances).__name__}")


def crossover_point(axis: Sequence[float], ibfd: Sequence[float], hd: Sequence[float]) -> Optional[float]:
    """
    First axis value where IBFD SE falls below HD SE, linearly interpolated.

    Returns axis[0] when IBFD is already below HD there, None when it never is.
    """
    axis = np.asarray(axis, dtype=float)
    diff = np.asarray(ibfd, dtype=float) - np.asarray(hd, dtype=float)
    if diff.size == 0:
        return None
    if diff[0] < 0:
        return float(axis[0])
    for i in range(len(diff) - 1):
        if diff[i] >= 0 > diff[i + 1]:
            frac = diff[i] / (diff[i] - diff[i + 1])
            return float(axis[i] + frac * (axis[i + 1] - axis[i]))
    return None
