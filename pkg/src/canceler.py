"""
Multi-tap analog SI canceler.

Covers the micro-strip and optical-domain (FBG) loss regimes, tap-weight
fitting by box-constrained least squares over the sampled band of interest,
and the cancellation figure in dB.
"""

import logging
from dataclasses import dataclass, replace
from typing import List, Optional, Sequence

import numpy as np
from scipy.optimize import lsq_linear

from .channel import SPEED_OF_LIGHT

logger = logging.getLogger(__name__)

CANCELLATION_CAP_DB = 200.0
WEIGHT_BOUND = 1.0

# ---- band of interest ----
BOI_CENTER_HZ = 28e9
BOI_BANDWIDTH_HZ = 400e6
BOI_STEP_HZ = 1e6

# ---- bounded solver ----
BVLS_TOL = 1e-10


def _db_to_amplitude(db) -> np.ndarray:
    return 10.0 ** (-np.asarray(db, dtype=float) / 20.0)


# ============================================================
# Loss profiles
# ============================================================

@dataclass(frozen=True)
class LossProfile:
    """
    Insertion-loss model of one canceler technology.

    per_meter_loss_db: line/fiber propagation loss
    coupler_db: hybrid coupler loss feeding the canceler
    stage_insertion_db: through-loss of one tap coupler; every tap signal
        crosses the couplers of the other M - 1 taps
    coil_pitch: fixed physical length per tap (coiled fiber); when None the
        pitch follows the tap delay spacing at `propagation_speed`
    """
    kind: str
    per_meter_loss_db: float
    coupler_db: float
    propagation_speed: float
    stage_insertion_db: float = 0.0
    coil_pitch: Optional[float] = None

    def __post_init__(self):
        if self.kind not in ("microstrip", "fbg"):
            raise ValueError(f"unknown loss profile kind {self.kind!r}")
        if self.per_meter_loss_db <= 0:
            raise ValueError(f"per-meter loss must be positive, got {self.per_meter_loss_db}")
        if self.propagation_speed <= 0:
            raise ValueError(f"propagation speed must be positive, got {self.propagation_speed}")

    def tap_pitch(self, tap_spacing: float) -> float:
        if self.coil_pitch is not None:
            return self.coil_pitch
        return self.propagation_speed * tap_spacing


MICROSTRIP = LossProfile(
    kind="microstrip",
    per_meter_loss_db=2.967,
    coupler_db=0.0,
    propagation_speed=SPEED_OF_LIGHT / np.sqrt(3.0),
    stage_insertion_db=2.0,
)

OPTICAL = LossProfile(
    kind="fbg",
    per_meter_loss_db=0.461,
    coupler_db=20.0,
    propagation_speed=SPEED_OF_LIGHT / 1.468,
    coil_pitch=0.02,
)

PROFILES = {"microstrip": MICROSTRIP, "fbg": OPTICAL}


# ============================================================
# Canceler
# ============================================================

@dataclass(frozen=True)
class Canceler:
    delays: np.ndarray
    coupler_loss: float
    propagation_loss: np.ndarray
    tap_coupling: np.ndarray
    band: np.ndarray  # angular frequencies (rad/s)
    weights: Optional[np.ndarray] = None  # w_I + j w_Q per tap

    def __post_init__(self):
        delays = np.asarray(self.delays, dtype=float)
        if delays.ndim != 1 or delays.size < 1:
            raise ValueError("canceler needs at least one tap")
        if np.any(np.diff(delays) <= 0):
            raise ValueError("tap delays must be strictly increasing")
        for name in ("propagation_loss", "tap_coupling"):
            arr = np.asarray(getattr(self, name), dtype=float)
            if arr.shape != delays.shape:
                raise ValueError(f"{name} must have one entry per tap")
            if np.any(arr <= 0) or np.any(arr > 1):
                raise ValueError(f"{name} must lie in (0, 1]")
        if not 0 < self.coupler_loss <= 1:
            raise ValueError(f"coupler loss must lie in (0, 1], got {self.coupler_loss}")

        weights = self.weights
        if weights is None:
            weights = np.zeros(delays.size, dtype=complex)
        weights = np.asarray(weights, dtype=complex)
        if weights.shape != delays.shape:
            raise ValueError("one complex weight per tap is required")
        if np.any(np.abs(weights.real) > WEIGHT_BOUND) or np.any(np.abs(weights.imag) > WEIGHT_BOUND):
            raise ValueError("canceler weights must lie in [-1, 1] (passive attenuators)")
        object.__setattr__(self, "weights", weights)

    @property
    def n_taps(self) -> int:
        return len(self.delays)

    @property
    def tap_gains(self) -> np.ndarray:
        return self.coupler_loss * np.asarray(self.propagation_loss) * np.asarray(self.tap_coupling)

    def basis(self, omega: np.ndarray) -> np.ndarray:
        """Per-tap responses with unit weights, shape (len(omega), M)."""
        return self.tap_gains[None, :] * np.exp(-1j * np.outer(omega, self.delays))

    def with_weights(self, weights: np.ndarray) -> "Canceler":
        return replace(self, weights=np.asarray(weights, dtype=complex))


def canceler_response(c: Canceler, omega) -> np.ndarray:
    """h_can(omega) over scalar or array omega."""
    omega = np.asarray(omega, dtype=float)
    span = (c.band.min(), c.band.max())
    tol = 1e-9 * max(abs(span[1]), 1.0)
    if np.any(omega < span[0] - tol) or np.any(omega > span[1] + tol):
        raise ValueError("frequency outside the canceler's band grid")
    response = c.basis(np.atleast_1d(omega)) @ c.weights
    return response[0] if omega.ndim == 0 else response


def band_grid(
    center_hz: float = BOI_CENTER_HZ,
    bandwidth_hz: float = BOI_BANDWIDTH_HZ,
    step_hz: float = BOI_STEP_HZ,
    min_points: int = 1,
) -> np.ndarray:
    """Angular-frequency grid over [center - B/2, center + B/2]."""
    n_points = max(int(round(bandwidth_hz / step_hz)) + 1, min_points)
    freqs = np.linspace(center_hz - bandwidth_hz / 2, center_hz + bandwidth_hz / 2, n_points)
    return 2 * np.pi * freqs


def apply_loss_profile(
    profile: LossProfile,
    M: int,
    delay_span: float,
    band: Optional[np.ndarray] = None,
) -> Canceler:
    """
    Unweighted canceler whose M taps cover [0, delay_span).

    Tap m (1-based) sits at (m-1)*delay_span/M and has traversed m pitches of
    line, so alpha_1 is one pitch of propagation loss. All taps share the
    coupler through-loss of the M - 1 other stages.
    """
    if M < 1:
        raise ValueError(f"canceler needs at least one tap, got M={M}")
    if delay_span <= 0:
        raise ValueError(f"delay span must be positive, got {delay_span}")
    if band is None:
        band = band_grid()

    spacing = delay_span / M
    taps = np.arange(1, M + 1)
    lengths = taps * profile.tap_pitch(spacing)
    propagation = _db_to_amplitude(profile.per_meter_loss_db * lengths)

    coupling = np.full(M, _db_to_amplitude(profile.stage_insertion_db * (M - 1)))

    return Canceler(
        delays=(taps - 1) * spacing,
        coupler_loss=float(_db_to_amplitude(profile.coupler_db)),
        propagation_loss=propagation,
        tap_coupling=coupling,
        band=np.asarray(band, dtype=float),
    )


# ============================================================
# Weight fitting
# ============================================================

@dataclass(frozen=True)
class FitResult:
    weights: np.ndarray
    residual: float
    bounded: bool  # bounded solver was needed


def _real_system(A: np.ndarray, h: np.ndarray):
    top = np.hstack([A.real, -A.imag])
    bottom = np.hstack([A.imag, A.real])
    return np.vstack([top, bottom]), np.concatenate([h.real, h.imag])


def fit_weights(target: np.ndarray, c: Canceler) -> FitResult:
    """
    Least-squares tap weights with every w_I, w_Q in [-1, 1].

    The unconstrained solution is used when it is feasible; otherwise a
    bounded-variable LS solve takes over.
    """
    target = np.asarray(target, dtype=complex)
    if target.shape != c.band.shape:
        raise ValueError(f"target has {target.size} samples but the band grid has {c.band.size}")
    if target.size < 2 * c.n_taps:
        raise ValueError(
            f"band grid of {target.size} points cannot identify {c.n_taps} taps (need >= {2 * c.n_taps})"
        )

    A = c.basis(c.band)
    A_r, b = _real_system(A, target)
    M = c.n_taps

    x, *_ = np.linalg.lstsq(A_r, b, rcond=None)
    bounded = bool(np.any(np.abs(x) > WEIGHT_BOUND))
    if bounded:
        logger.debug(f"[Canceler] unconstrained weights leave the box (max |w| = {np.abs(x).max():.3g}), using BVLS")
        sol = lsq_linear(A_r, b, bounds=(-WEIGHT_BOUND, WEIGHT_BOUND), method="bvls", tol=BVLS_TOL)
        x = np.clip(sol.x, -WEIGHT_BOUND, WEIGHT_BOUND)

    weights = x[:M] + 1j * x[M:]
    residual = float(np.sum(np.abs(target - A @ weights) ** 2))
    zero_residual = float(np.sum(np.abs(target) ** 2))
    if residual > zero_residual:
        weights = np.zeros(M, dtype=complex)
        residual = zero_residual
    return FitResult(weights=weights, residual=residual, bounded=bounded)


def cancellation_db(target: np.ndarray, c_fitted: Canceler) -> float:
    """Energy ratio of the SI response before and after cancellation, in dB."""
    target = np.asarray(target, dtype=complex)
    energy = float(np.sum(np.abs(target) ** 2))
    if energy == 0.0:
        raise ValueError("cancellation is undefined for a zero-energy target")
    residual = float(np.sum(np.abs(target - canceler_response(c_fitted, c_fitted.band)) ** 2))
    if residual <= energy * 10 ** (-CANCELLATION_CAP_DB / 10):
        return CANCELLATION_CAP_DB
    return float(10 * np.log10(energy / residual))


# ============================================================
# SI band responses
# ============================================================

@dataclass(frozen=True)
class SiBandModel:
    """
    Per-RF-pair SI response used as the canceler's fitting target.

    The LOS path sits at los_distance / c. The scattered power follows an
    exponential power-delay profile with time constant pdp_decay: the
    n_clusters * n_rays in-span rays share the part arriving before
    delay_spread, the n_tail_rays late rays carry the rest.
    """
    delay_spread: float = 200e-9
    pdp_decay: float = 60e-9
    rician_factor: float = 10.0
    n_clusters: int = 2
    n_rays: int = 8
    n_tail_rays: int = 16
    isolation_db: float = 55.0
    los_distance: float = 0.1

    def __post_init__(self):
        if self.delay_spread <= 0 or self.pdp_decay <= 0:
            raise ValueError("delay spread and PDP decay must be positive")
        if self.rician_factor <= 0:
            raise ValueError(f"Rician factor must be positive, got {self.rician_factor}")
        if self.n_clusters < 1 or self.n_rays < 1 or self.n_tail_rays < 0:
            raise ValueError("need at least one in-span ray and a non-negative tail")

    @property
    def tail_share(self) -> float:
        """Fraction of the scattered power arriving after delay_spread."""
        if self.n_tail_rays == 0:
            return 0.0
        return float(np.exp(-self.delay_spread / self.pdp_decay))


@dataclass(frozen=True)
class SiPaths:
    delays: np.ndarray
    gains: np.ndarray

    def response(self, band: np.ndarray) -> np.ndarray:
        return np.exp(-1j * np.outer(band, self.delays)) @ self.gains


def _rays_with_power(n: int, power: float, rng: np.random.Generator) -> np.ndarray:
    gains = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    return np.sqrt(power) * gains / np.linalg.norm(gains)


def draw_si_paths(model: SiBandModel, rng: np.random.Generator) -> SiPaths:
    """LOS path first, then the in-span and late rays; all scaled by the antenna isolation."""
    kappa = model.rician_factor
    scattered = 1 / (kappa + 1)
    tail = model.tail_share

    # truncated exponential on [0, delay_spread)
    n_span = model.n_clusters * model.n_rays
    u = rng.uniform(size=n_span)
    span_delays = -model.pdp_decay * np.log1p(-u * (1 - np.exp(-model.delay_spread / model.pdp_decay)))
    tail_delays = model.delay_spread + rng.exponential(model.pdp_decay, model.n_tail_rays)

    gains = np.concatenate([
        [np.sqrt(kappa / (kappa + 1))],
        _rays_with_power(n_span, scattered * (1 - tail), rng),
        _rays_with_power(model.n_tail_rays, scattered * tail, rng) if model.n_tail_rays else [],
    ])
    return SiPaths(
        delays=np.concatenate([[model.los_distance / SPEED_OF_LIGHT], span_delays, tail_delays]),
        gains=_db_to_amplitude(model.isolation_db) * gains,
    )


def cancellation_trials(
    profile: LossProfile,
    tap_counts: Sequence[int],
    bandwidths: Sequence[float],
    si_model: SiBandModel,
    trials: int,
    rng: np.random.Generator,
    center_hz: float = BOI_CENTER_HZ,
    step_hz: float = BOI_STEP_HZ,
) -> np.ndarray:
    """
    Cancellation in dB for every (trial, bandwidth, tap count).

    Each trial draws one SI realization shared by all cells. A band grid too
    coarse for M taps is refined to 2M + 1 points.
    """
    if not tap_counts or not bandwidths:
        raise ValueError("tap_counts and bandwidths must be nonempty")
    if trials < 1:
        raise ValueError(f"trials must be >= 1, got {trials}")

    out = np.empty((trials, len(bandwidths), len(tap_counts)))
    for t in range(trials):
        paths = draw_si_paths(si_model, rng)
        for i, bw in enumerate(bandwidths):
            for j, M in enumerate(tap_counts):
                band = band_grid(center_hz, bw, step_hz, min_points=2 * M + 1)
                target = paths.response(band)
                c = apply_loss_profile(profile, M, si_model.delay_spread, band)
                fit = fit_weights(target, c)
                out[t, i, j] = cancellation_db(target, c.with_weights(fit.weights))
    return out


def sweep_taps_bandwidth(
    profile: LossProfile,
    tap_counts: List[int],
    bandwidths: List[float],
    si_model: SiBandModel,
    trials: int,
    rng: np.random.Generator,
    **grid_kwargs,
) -> np.ndarray:
    """Mean cancellation (dB) per (bandwidth, tap count)."""
    grid = cancellation_trials(profile, tap_counts, bandwidths, si_model, trials, rng, **grid_kwargs).mean(axis=0)
    best = np.unravel_index(np.argmax(grid), grid.shape)
    logger.info(
        f"[Canceler] {profile.kind}: best {grid[best]:.1f} dB at "
        f"{bandwidths[best[0]] / 1e6:.0f} MHz, {tap_counts[best[1]]} taps"
    )
    return grid
