"""
Signal chain at the donor and IAB-node: transmit HWI, staged SIC, baseband
beamformer design and the closed-form signal/impairment covariances.

All per-subcarrier quantities are stacked along axis 0, shape (K, U, U).
"""

import logging
from dataclasses import dataclass

import numpy as np
import scipy.linalg

logger = logging.getLogger(__name__)

ZF_CONDITION_LIMIT = 1e12
ZF_RIDGE = 1e-12


def _herm(A: np.ndarray) -> np.ndarray:
    return np.conj(np.swapaxes(A, -1, -2))


def _hermitize(A: np.ndarray) -> np.ndarray:
    return 0.5 * (A + _herm(A))


def _diag_matrix(v: np.ndarray) -> np.ndarray:
    """(K, U) -> (K, U, U) diagonal stack."""
    return v[..., :, None] * np.eye(v.shape[-1])


# ============================================================
# Configuration types
# ============================================================

@dataclass(frozen=True)
class HwiConfig:
    """Transmit (rho) and receive (beta) hardware-impairment factors, linear."""
    rho: float = 0.0
    beta: float = 0.0

    def __post_init__(self):
        if self.rho < 0 or self.beta < 0:
            raise ValueError(f"HWI factors must be >= 0, got rho={self.rho}, beta={self.beta}")

    @classmethod
    def from_db(cls, rho_db: float, beta_db: float) -> "HwiConfig":
        return cls(rho=10 ** (rho_db / 10), beta=10 ** (beta_db / 10))


@dataclass(frozen=True)
class SicBudget:
    """Antenna isolation followed by analog SIC; eta is the combined power factor."""
    isolation_db: float = 55.0
    analog_db: float = 25.0

    def __post_init__(self):
        if self.isolation_db + self.analog_db < 0:
            raise ValueError("SIC budget cannot amplify the SI signal (eta must be <= 1)")

    @property
    def eta(self) -> float:
        return 10 ** (-(self.isolation_db + self.analog_db) / 10)


@dataclass(frozen=True)
class ErrorVariances:
    """Per-entry effective-channel estimation error variances."""
    nd: float = 0.0
    si: float = 0.0
    en: float = 0.0

    def __post_init__(self):
        if min(self.nd, self.si, self.en) < 0:
            raise ValueError("estimation error variances must be >= 0")

    @classmethod
    def from_db(cls, nd_db: float, si_db: float, en_db: float) -> "ErrorVariances":
        return cls(nd=10 ** (nd_db / 10), si=10 ** (si_db / 10), en=10 ** (en_db / 10))


@dataclass(frozen=True)
class BasebandSet:
    f_bbd: np.ndarray
    f_bbn: np.ndarray
    w_bbn: np.ndarray

    def check_constraints(self, f_rfd: np.ndarray, f_rfn: np.ndarray, rtol: float = 1e-12) -> None:
        U = self.f_bbd.shape[-1]
        donor = np.sum(np.abs(f_rfd @ self.f_bbd) ** 2, axis=(-2, -1))
        if not np.allclose(donor, U, rtol=rtol, atol=0):
            raise ValueError(f"donor power constraint violated: ||F_RF F_BB||_F^2 = {donor.max():.6g}, expected {U}")
        streams = np.sum(np.abs(f_rfn @ self.f_bbn) ** 2, axis=-2)
        if not np.allclose(streams, 1.0, rtol=rtol, atol=0):
            raise ValueError("per-stream constraint ||F_RFN f_BBN,u|| = 1 violated")


def effective_channel(w_rf: np.ndarray, H: np.ndarray, f_rf: np.ndarray, scale: float = 1.0) -> np.ndarray:
    """scale * W_RF^H H[k] F_RF for every k."""
    return scale * (w_rf.conj().T[None, :, :] @ H @ f_rf[None, :, :])


# ============================================================
# Impairments and digital SIC
# ============================================================

def apply_tx_hwi(
    x_tilde: np.ndarray,
    f_bb: np.ndarray,
    zeta: float,
    rho: float,
    rng: np.random.Generator,
) -> np.ndarray:
    """
    Add transmit HWI with covariance rho * zeta * diag(F_BB F_BB^H).

    x_tilde is (K, U) or (K, U, T) for T independent symbol vectors.
    """
    if rho < 0:
        raise ValueError(f"rho must be >= 0, got {rho}")
    x_tilde = np.asarray(x_tilde)
    if rho == 0:
        return x_tilde.copy()
    variance = rho * zeta * np.sum(np.abs(f_bb) ** 2, axis=-1)  # (K, U)
    if x_tilde.ndim == 3:
        variance = variance[:, :, None]
    noise = rng.standard_normal(x_tilde.shape) + 1j * rng.standard_normal(x_tilde.shape)
    return x_tilde + np.sqrt(variance / 2) * noise


def digital_sic(
    received: np.ndarray,
    h_si_hat: np.ndarray,
    f_bbn: np.ndarray,
    s_n: np.ndarray,
) -> np.ndarray:
    """Subtract the reconstructed SI Ĥ_SI F_BBN s_N from the RF-combined signal."""
    s_n = np.asarray(s_n)
    squeeze = s_n.ndim == 2
    s = s_n[..., None] if squeeze else s_n
    reconstruction = h_si_hat @ f_bbn @ s
    if squeeze:
        reconstruction = reconstruction[..., 0]
    return np.asarray(received) - reconstruction


# ============================================================
# Baseband beamformers
# ============================================================

def bb_precoder_svd(h_nd_hat: np.ndarray, f_rfd: np.ndarray) -> np.ndarray:
    """Right singular vectors of Ĥ_ND[k], scaled so ||F_RFD F_BBD[k]||_F^2 = U."""
    _, _, vh = np.linalg.svd(h_nd_hat)
    V = _herm(vh)
    U = V.shape[-1]

    # first nonzero entry of each column made real-positive
    mags = np.abs(V)
    first = np.argmax(mags > 1e-12 * mags.max(axis=-2, keepdims=True), axis=-2)  # (K, U)
    lead = np.take_along_axis(V, first[:, None, :], axis=-2)
    V = V * np.exp(-1j * np.angle(lead))

    norms = np.linalg.norm(f_rfd[None, :, :] @ V, axis=(-2, -1))
    return np.sqrt(U) * V / norms[:, None, None]


def bb_precoder_zf(h_en_hat: np.ndarray, f_rfn: np.ndarray, normalize: bool = True) -> np.ndarray:
    """
    Zero-forcing F = Ĥ^H (Ĥ Ĥ^H)^-1 per subcarrier, columns scaled to
    ||F_RFN f_u|| = 1. Near-singular Gram matrices get a small ridge.
    """
    h = np.asarray(h_en_hat)
    U = h.shape[-1]
    gram = h @ _herm(h)
    cond = np.linalg.cond(gram)
    bad = ~np.isfinite(cond) | (cond > ZF_CONDITION_LIMIT)
    if np.any(bad):
        trace = np.real(np.trace(gram, axis1=-2, axis2=-1))
        if np.any(trace[bad] <= 0):
            raise ValueError("zero-forcing is undefined for an all-zero access channel")
        ridge = ZF_RIDGE * trace / U
        gram = gram + np.where(bad, ridge, 0.0)[:, None, None] * np.eye(U)
        logger.warning(
            f"[ZF] singular Gram matrix on {int(bad.sum())} subcarrier(s); "
            f"ridge up to {ridge[bad].max():.3e} added"
        )
    F = _herm(np.linalg.solve(gram, h))
    if not normalize:
        return F
    col_norms = np.linalg.norm(f_rfn[None, :, :] @ F, axis=-2)
    return F / col_norms[:, None, :]


def mmse_combiner(
    h_nd_hat: np.ndarray,
    f_bbd: np.ndarray,
    phi: np.ndarray,
    omega: np.ndarray,
    zeta: float,
) -> np.ndarray:
    """W_BBN[k] = zeta (Phi_b + Omega_b)^-1 Ĥ_ND F_BBD via Cholesky."""
    rhs = h_nd_hat @ f_bbd
    W = np.empty_like(rhs, dtype=complex)
    for k in range(rhs.shape[0]):
        total = _hermitize(phi[k] + omega[k])
        try:
            factor = scipy.linalg.cho_factor(total)
        except (np.linalg.LinAlgError, scipy.linalg.LinAlgError) as e:
            min_eig = float(np.linalg.eigvalsh(total).min())
            raise ValueError(
                f"Phi_b + Omega_b is not positive definite on subcarrier {k} (min eigenvalue {min_eig:.3e})"
            ) from e
        W[k] = zeta * scipy.linalg.cho_solve(factor, rhs[k])
    return W


# ============================================================
# Closed-form covariances
# ============================================================

@dataclass(frozen=True)
class BackhaulCovariances:
    phi: np.ndarray
    omega_1: np.ndarray  # backhaul transmit HWI + estimation error
    omega_2: np.ndarray  # residual SI: SI transmit HWI + SI estimation error
    omega_3: np.ndarray  # receive HWI
    noise: np.ndarray
    omega_3_hd: np.ndarray  # receive HWI without the SI-driven part

    @property
    def omega(self) -> np.ndarray:
        return self.omega_1 + self.omega_2 + self.omega_3 + self.noise

    @property
    def omega_hd(self) -> np.ndarray:
        return self.omega_1 + self.omega_3_hd + self.noise


@dataclass(frozen=True)
class AccessCovariances:
    """Per-user scalars, each (K, U)."""
    phi: np.ndarray
    omega_1: np.ndarray  # multiuser interference + transmit HWI
    omega_2: np.ndarray  # estimation error
    omega_3: np.ndarray  # receive HWI
    noise: np.ndarray

    @property
    def omega(self) -> np.ndarray:
        return self.omega_1 + self.omega_2 + self.omega_3 + self.noise


def _hwi_and_error(h_hat, f_bb, zeta, rho, error_variance):
    FF = f_bb @ _herm(f_bb)
    diag_ff = np.real(np.diagonal(FF, axis1=-2, axis2=-1))
    tr_ff = diag_ff.sum(axis=-1)
    U = h_hat.shape[-2]
    hwi = zeta * rho * (h_hat * diag_ff[:, None, :]) @ _herm(h_hat)
    err = (error_variance * zeta * (rho + 1) * tr_ff)[:, None, None] * np.eye(U)
    return _hermitize(hwi + err)


def build_covariances_backhaul(
    h_nd_hat: np.ndarray,
    h_si_hat: np.ndarray,
    f_bbd: np.ndarray,
    f_bbn: np.ndarray,
    hwi: HwiConfig,
    errors: ErrorVariances,
    noise_var: float,
    w_rf: np.ndarray,
    zeta: float,
) -> BackhaulCovariances:
    """
    Signal covariance Phi_b and the impairment terms Omega_b^(1..3) plus noise
    at the IAB-node receiver. The noise term is sigma^2 W_RF^H W_RF, i.e.
    sigma^2 (n_R/U) I for subarray combiners.
    """
    K, U, _ = h_nd_hat.shape
    desired = h_nd_hat @ f_bbd
    phi = _hermitize(zeta * desired @ _herm(desired))
    omega_1 = _hwi_and_error(h_nd_hat, f_bbd, zeta, hwi.rho, errors.nd)
    omega_2 = _hwi_and_error(h_si_hat, f_bbn, zeta, hwi.rho, errors.si)
    noise = np.broadcast_to(_hermitize(noise_var * (w_rf.conj().T @ w_rf)), (K, U, U)).copy()

    def rx_hwi(total):
        return hwi.beta * _diag_matrix(np.real(np.diagonal(total, axis1=-2, axis2=-1)))

    return BackhaulCovariances(
        phi=phi,
        omega_1=omega_1,
        omega_2=omega_2,
        omega_3=rx_hwi(phi + omega_1 + omega_2 + noise),
        noise=noise,
        omega_3_hd=rx_hwi(phi + omega_1 + noise),
    )


def build_covariances_access(
    h_en_hat: np.ndarray,
    f_bbn: np.ndarray,
    hwi: HwiConfig,
    error_variance: float,
    noise_var: float,
    w_rf: np.ndarray,
    zeta: float,
) -> AccessCovariances:
    """
    Per-user terms for the node-to-UE downlink. Row u of Ĥ_EN[k] is user u's
    effective channel; the noise term sigma_E^2 ||w_u||^2 equals sigma_E^2 N_R
    for unit-modulus user combiners.
    """
    K, U, _ = h_en_hat.shape
    G = h_en_hat @ f_bbn
    power = np.abs(G) ** 2
    phi = zeta * np.real(np.diagonal(power, axis1=-2, axis2=-1))
    interference = zeta * power.sum(axis=-1) - phi

    diag_ff = np.sum(np.abs(f_bbn) ** 2, axis=-1)  # (K, U)
    tx_hwi = zeta * hwi.rho * np.sum(np.abs(h_en_hat) ** 2 * diag_ff[:, None, :], axis=-1)
    omega_1 = interference + tx_hwi
    omega_2 = np.broadcast_to(
        (error_variance * zeta * (hwi.rho + 1) * diag_ff.sum(axis=-1))[:, None], (K, U)
    ).copy()
    noise = np.broadcast_to(noise_var * np.sum(np.abs(w_rf) ** 2, axis=0), (K, U)).copy()
    omega_3 = hwi.beta * (phi + omega_1 + omega_2 + noise)
    return AccessCovariances(phi=phi, omega_1=omega_1, omega_2=omega_2, omega_3=omega_3, noise=noise)
