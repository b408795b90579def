"""
Wideband FR2 channel models.

Cluster-ray channels for the backhaul/access links and the Rician
near-field self-interference (SI) channel seen at the IAB-node.
"""

import json
import logging
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Tuple

import numpy as np
from scipy.spatial.distance import cdist

logger = logging.getLogger(__name__)

SPEED_OF_LIGHT = 3e8

# ---- ray statistics ----
ANGLE_SPREAD = np.deg2rad(5.0)
DEFAULT_CLUSTERS = 8
DEFAULT_RAYS = 10

# ---- pulse shaping ----
RAISED_COSINE_GUARD = 1e-9  # fraction of T_s treated as the singular point

# ---- dump format ----
_BINARY_MAGIC = b"IABH"


def _freeze(arr: Optional[np.ndarray]) -> Optional[np.ndarray]:
    if arr is None:
        return None
    arr = np.array(arr, copy=True)
    arr.flags.writeable = False
    return arr


# ============================================================
# Geometry
# ============================================================

@dataclass(frozen=True)
class ArrayGeometry:
    """
    Planar array in its local XY-plane.

    Elements are ordered subarray-major: all elements of panel 0 first, then
    panel 1, ... so that block-diagonal RF matrices map onto contiguous rows.
    """
    rows: int
    cols: int
    element_coords: np.ndarray
    spacing: float
    n_subarrays: int = 1

    def __post_init__(self):
        coords = np.asarray(self.element_coords, dtype=float)
        if coords.shape != (self.rows * self.cols, 3):
            raise ValueError(
                f"element_coords must have shape ({self.rows * self.cols}, 3), got {coords.shape}"
            )
        if np.any(coords[:, 2] != 0.0):
            raise ValueError("array elements must lie in the XY-plane (z = 0)")
        object.__setattr__(self, "element_coords", _freeze(coords))

    @property
    def n_elements(self) -> int:
        return self.rows * self.cols

    @property
    def subarray_size(self) -> int:
        return self.n_elements // self.n_subarrays

    @classmethod
    def upa(cls, rows: int, cols: int, spacing: float, n_subarrays: int = 1) -> "ArrayGeometry":
        """Uniform planar array split into `n_subarrays` equal column groups."""
        if rows < 1 or cols < 1:
            raise ValueError(f"array must have at least one element, got {rows}x{cols}")
        if n_subarrays < 1 or cols % n_subarrays:
            raise ValueError(f"{cols} columns cannot be split into {n_subarrays} subarrays")
        sub_cols = cols // n_subarrays
        coords = [
            (r * spacing, (u * sub_cols + c) * spacing, 0.0)
            for u in range(n_subarrays)
            for r in range(rows)
            for c in range(sub_cols)
        ]
        return cls(rows=rows, cols=cols, element_coords=np.array(coords),
                   spacing=spacing, n_subarrays=n_subarrays)


def steering_vector(
    geometry: ArrayGeometry,
    azimuth: float,
    elevation: float,
    wavelength: float,
) -> np.ndarray:
    """Unit-norm array response toward (azimuth, elevation)."""
    return steering_matrix(geometry, np.atleast_1d(azimuth), np.atleast_1d(elevation), wavelength)[:, 0]


def steering_matrix(
    geometry: ArrayGeometry,
    azimuths: np.ndarray,
    elevations: np.ndarray,
    wavelength: float,
) -> np.ndarray:
    """Steering vectors stacked as columns, shape (N, len(azimuths))."""
    if wavelength <= 0:
        raise ValueError(f"wavelength must be positive, got {wavelength}")
    az = np.asarray(azimuths, dtype=float)
    el = np.asarray(elevations, dtype=float)
    if not (np.all(np.isfinite(az)) and np.all(np.isfinite(el))):
        raise ValueError("steering angles must be finite")
    directions = np.stack(
        [np.cos(az) * np.cos(el), np.sin(az) * np.cos(el), np.sin(el)], axis=0
    )
    phases = (2 * np.pi / wavelength) * (geometry.element_coords @ directions)
    return np.exp(1j * phases) / np.sqrt(geometry.n_elements)


# ============================================================
# Path loss and pulse shaping
# ============================================================

def close_in_path_loss(r: float, r0: float, wavelength: float, exponent: float) -> float:
    """Close-in reference-distance path loss (linear, >= 1 past r0)."""
    if r0 <= 0:
        raise ValueError(f"reference distance must be positive, got r0={r0}")
    if r < r0:
        raise ValueError(f"r={r} m is inside the reference distance r0={r0} m")
    return (4 * np.pi * r0 / wavelength) ** 2 * (r / r0) ** exponent


def raised_cosine(t, T_s: float, rolloff: float = 1.0):
    """
    Raised-cosine pulse p(t).

    Args:
        t: time(s) in seconds, scalar or array
        T_s: symbol period
        rolloff: excess bandwidth in [0, 1]
    """
    if T_s <= 0:
        raise ValueError(f"T_s must be positive, got {T_s}")
    if not 0.0 <= rolloff <= 1.0:
        raise ValueError(f"rolloff must be in [0, 1], got {rolloff}")

    t = np.asarray(t, dtype=float)
    x = t / T_s
    out = np.sinc(x)
    if rolloff > 0:
        singular = np.abs(np.abs(t) - T_s / (2 * rolloff)) < RAISED_COSINE_GUARD * T_s
        denom = np.where(singular, 1.0, 1.0 - (2 * rolloff * x) ** 2)
        limit = np.pi / 4 * np.sinc(1.0 / (2 * rolloff))
        out = np.where(singular, limit, out * np.cos(np.pi * rolloff * x) / denom)
    return float(out) if out.ndim == 0 else out


def pulse_energy(rolloff: float) -> float:
    """Energy of the raised-cosine pulse in units of T_s."""
    return 1.0 - rolloff / 4.0


def subcarrier_tap_gains(
    delays: np.ndarray,
    K: int,
    D: int,
    T_s: float,
    rolloff: float = 1.0,
) -> np.ndarray:
    """
    Per-subcarrier gains chi for every delay.

    Returns:
        (len(delays), K) complex array,
        chi[l, k] = sum_d p(d*T_s - tau_l) * exp(-j 2 pi k d / K)
    """
    delays = np.atleast_1d(np.asarray(delays, dtype=float))
    if np.any(delays < 0) or np.any(delays >= D * T_s):
        raise ValueError(f"delays must lie in [0, {D * T_s:.3e}) s (cyclic-prefix span)")
    d = np.arange(D)
    pulses = raised_cosine(d[None, :] * T_s - delays[:, None], T_s, rolloff)
    dft = np.exp(-2j * np.pi * np.outer(d, np.arange(K)) / K)
    return pulses @ dft


def subcarrier_tap_gain(tau: float, k: int, K: int, D: int, T_s: float, rolloff: float = 1.0) -> complex:
    if not 0 <= k < K:
        raise ValueError(f"subcarrier index {k} outside [0, {K})")
    return complex(subcarrier_tap_gains(np.array([tau]), K, D, T_s, rolloff)[0, k])


# ============================================================
# Cluster-ray parameters
# ============================================================

@dataclass(frozen=True)
class ClusterRayParams:
    """Per-ray angles are absolute (cluster mean + Laplacian offset)."""
    n_clusters: int
    n_rays: int
    mean_azimuth_rx: np.ndarray
    mean_elevation_rx: np.ndarray
    mean_azimuth_tx: np.ndarray
    mean_elevation_tx: np.ndarray
    azimuth_rx: np.ndarray
    elevation_rx: np.ndarray
    azimuth_tx: np.ndarray
    elevation_tx: np.ndarray
    gains: np.ndarray
    delays: np.ndarray
    delay_span: float

    def __post_init__(self):
        n_paths = self.n_clusters * self.n_rays
        for name in ("azimuth_rx", "elevation_rx", "azimuth_tx", "elevation_tx", "gains", "delays"):
            arr = np.asarray(getattr(self, name))
            if arr.shape != (n_paths,):
                raise ValueError(f"{name} must have {n_paths} entries, got shape {arr.shape}")
            object.__setattr__(self, name, _freeze(arr))
        for name in ("mean_azimuth_rx", "mean_elevation_rx", "mean_azimuth_tx", "mean_elevation_tx"):
            object.__setattr__(self, name, _freeze(np.asarray(getattr(self, name), dtype=float)))

        if np.any(np.abs(self.mean_azimuth_rx) > np.pi) or np.any(np.abs(self.mean_azimuth_tx) > np.pi):
            raise ValueError("cluster mean azimuths must lie in [-pi, pi]")
        if np.any(np.abs(self.mean_elevation_rx) > np.pi / 2) or np.any(np.abs(self.mean_elevation_tx) > np.pi / 2):
            raise ValueError("cluster mean elevations must lie in [-pi/2, pi/2]")
        if np.any(self.delays < 0) or np.any(self.delays >= self.delay_span):
            raise ValueError(f"ray delays must lie in [0, {self.delay_span:.3e}) s")

    @property
    def n_paths(self) -> int:
        return self.n_clusters * self.n_rays


def _wrap_angle(a: np.ndarray) -> np.ndarray:
    return np.angle(np.exp(1j * a))


def draw_cluster_ray_params(
    n_clusters: int,
    n_rays: int,
    delay_span: float,
    rng: np.random.Generator,
    angle_spread: float = ANGLE_SPREAD,
) -> ClusterRayParams:
    """
    Draw cluster means uniformly, per-ray Laplacian offsets, CN(0,1) gains and
    i.i.d. uniform delays on [0, delay_span).
    """
    if n_clusters < 1 or n_rays < 1:
        raise ValueError(f"need at least one cluster and ray, got {n_clusters}x{n_rays}")
    scale = angle_spread / np.sqrt(2)  # Laplacian std = sqrt(2) * scale

    means = {
        "mean_azimuth_rx": rng.uniform(-np.pi, np.pi, n_clusters),
        "mean_elevation_rx": rng.uniform(-np.pi / 2, np.pi / 2, n_clusters),
        "mean_azimuth_tx": rng.uniform(-np.pi, np.pi, n_clusters),
        "mean_elevation_tx": rng.uniform(-np.pi / 2, np.pi / 2, n_clusters),
    }

    def spread(mean: np.ndarray) -> np.ndarray:
        return (mean[:, None] + rng.laplace(0.0, scale, (n_clusters, n_rays))).ravel()

    n_paths = n_clusters * n_rays
    return ClusterRayParams(
        n_clusters=n_clusters,
        n_rays=n_rays,
        azimuth_rx=_wrap_angle(spread(means["mean_azimuth_rx"])),
        elevation_rx=np.clip(spread(means["mean_elevation_rx"]), -np.pi / 2, np.pi / 2),
        azimuth_tx=_wrap_angle(spread(means["mean_azimuth_tx"])),
        elevation_tx=np.clip(spread(means["mean_elevation_tx"]), -np.pi / 2, np.pi / 2),
        gains=(rng.standard_normal(n_paths) + 1j * rng.standard_normal(n_paths)) / np.sqrt(2),
        delays=rng.uniform(0.0, delay_span, n_paths),
        delay_span=delay_span,
        **means,
    )


# ============================================================
# Channel realizations
# ============================================================

@dataclass(frozen=True)
class ChannelRealization:
    """
    H[k] for k = 0..K-1, shape (K, n_r, n_t), plus the factors that built it.

    For SI channels `los` holds the frequency-flat near-field matrix and the
    NLOS factors describe the scattered part.
    """
    per_subcarrier: np.ndarray
    path_loss_linear: float
    params: Optional[ClusterRayParams] = None
    steering_rx: Optional[np.ndarray] = None
    steering_tx: Optional[np.ndarray] = None
    path_gains: Optional[np.ndarray] = None  # diagonal of Pi[k], shape (K, L)
    los: Optional[np.ndarray] = None
    rician_factor: Optional[float] = None

    def __post_init__(self):
        h = np.asarray(self.per_subcarrier)
        if h.ndim != 3:
            raise ValueError(f"per_subcarrier must be (K, n_r, n_t), got shape {h.shape}")
        if not np.all(np.isfinite(h)):
            raise ValueError("channel realization contains non-finite entries")
        for name in ("per_subcarrier", "steering_rx", "steering_tx", "path_gains", "los"):
            object.__setattr__(self, name, _freeze(getattr(self, name)))

    @property
    def n_subcarriers(self) -> int:
        return self.per_subcarrier.shape[0]

    @property
    def shape(self) -> Tuple[int, int]:
        return self.per_subcarrier.shape[1], self.per_subcarrier.shape[2]

    def reconstruct(self) -> np.ndarray:
        """Rebuild H[k] from the stored factors."""
        if self.steering_rx is None or self.path_gains is None:
            raise ValueError("realization carries no factors (loaded from a dump?)")
        nlos = _assemble(self.steering_rx, self.path_gains, self.steering_tx)
        if self.los is None:
            return nlos
        w_los, w_nlos = _rician_weights(self.rician_factor)
        return w_los * self.los[None, :, :] + w_nlos * nlos


def _assemble(a_rx: np.ndarray, pi_diag: np.ndarray, a_tx: np.ndarray) -> np.ndarray:
    # A_r diag(pi[k]) A_t^H for every k
    return (a_rx[None, :, :] * pi_diag[:, None, :]) @ a_tx.conj().T


def generate_general_channel(
    tx: ArrayGeometry,
    rx: ArrayGeometry,
    params: Optional[ClusterRayParams],
    K: int,
    D: int,
    T_s: float,
    path_loss: float,
    wavelength: float,
    rng: Optional[np.random.Generator] = None,
    rolloff: float = 1.0,
) -> ChannelRealization:
    """
    Cluster-ray channel H[k] = A_r Pi[k] A_t^H.

    When `params` is None a fresh set with the default cluster/ray counts is
    drawn from `rng`.
    """
    if params is None:
        if rng is None:
            raise ValueError("either params or rng is required")
        params = draw_cluster_ray_params(DEFAULT_CLUSTERS, DEFAULT_RAYS, D * T_s, rng)
    if path_loss <= 0:
        raise ValueError(f"path loss must be positive, got {path_loss}")
    if params.delay_span > D * T_s * (1 + 1e-12):
        raise ValueError("ray delay span exceeds the cyclic prefix D*T_s")

    a_rx = steering_matrix(rx, params.azimuth_rx, params.elevation_rx, wavelength)
    a_tx = steering_matrix(tx, params.azimuth_tx, params.elevation_tx, wavelength)
    chi = subcarrier_tap_gains(params.delays, K, D, T_s, rolloff)
    scale = np.sqrt(rx.n_elements * tx.n_elements / (params.n_paths * path_loss))
    pi_diag = scale * params.gains[None, :] * chi.T

    return ChannelRealization(
        per_subcarrier=_assemble(a_rx, pi_diag, a_tx),
        path_loss_linear=float(path_loss),
        params=params,
        steering_rx=a_rx,
        steering_tx=a_tx,
        path_gains=pi_diag,
    )


# ============================================================
# Self-interference channel
# ============================================================

@dataclass(frozen=True)
class SiChannelSpec:
    rician_factor: float
    tx_rx_separation: float = 0.1
    separation_angle: float = np.pi / 6
    n_clusters: int = 2
    n_rays: int = 8
    nlos_params: Optional[ClusterRayParams] = None

    def __post_init__(self):
        if not self.rician_factor > 0:
            raise ValueError(f"Rician factor must be positive, got {self.rician_factor}")
        if self.tx_rx_separation <= 0:
            raise ValueError(f"TX/RX separation must be positive, got {self.tx_rx_separation}")

    @staticmethod
    def gamma(rx: ArrayGeometry, tx: ArrayGeometry) -> float:
        return float(np.sqrt(rx.n_elements * tx.n_elements))


def _rotation_y(angle: float) -> np.ndarray:
    c, s = np.cos(angle), np.sin(angle)
    return np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])


def si_panel_coords(tx: ArrayGeometry, rx: ArrayGeometry, spec: SiChannelSpec) -> Tuple[np.ndarray, np.ndarray]:
    """
    World coordinates of (rx, tx) elements at the IAB-node.

    The RX panel is centred on the origin in z = 0. The TX panel is centred,
    rotated by the separation angle about the y-axis, then shifted to
    z = tx_rx_separation.
    """
    rx_world = rx.element_coords - rx.element_coords.mean(axis=0)
    tx_local = tx.element_coords - tx.element_coords.mean(axis=0)
    tx_world = tx_local @ _rotation_y(spec.separation_angle).T
    tx_world = tx_world + np.array([0.0, 0.0, spec.tx_rx_separation])
    return rx_world, tx_world


def si_los_angles(spec: SiChannelSpec) -> Tuple[float, float, float, float]:
    """(azimuth_rx, elevation_rx, azimuth_tx, elevation_tx) along the boresight-to-boresight line."""
    toward_tx = np.array([0.0, 0.0, 1.0])
    toward_rx = _rotation_y(spec.separation_angle).T @ -toward_tx  # in TX local frame

    def angles(u: np.ndarray) -> Tuple[float, float]:
        return float(np.arctan2(u[1], u[0])), float(np.arcsin(np.clip(u[2], -1.0, 1.0)))

    az_r, el_r = angles(toward_tx)
    az_t, el_t = angles(toward_rx)
    return az_r, el_r, az_t, el_t


def si_los_matrix(
    tx: ArrayGeometry,
    rx: ArrayGeometry,
    spec: SiChannelSpec,
    wavelength: float,
) -> np.ndarray:
    """Near-field spherical-wave LOS SI matrix, shape (n_R, n_T)."""
    rx_world, tx_world = si_panel_coords(tx, rx, spec)
    distances = cdist(rx_world, tx_world)
    if np.any(distances <= 0):
        raise ValueError("coincident TX/RX elements (r_pq = 0) in SI geometry")

    gamma = spec.gamma(rx, tx)
    R = gamma / distances * np.exp(-2j * np.pi * distances / wavelength)
    az_r, el_r, az_t, el_t = si_los_angles(spec)
    a_r = steering_vector(rx, az_r, el_r, wavelength)
    a_t = steering_vector(tx, az_t, el_t, wavelength)
    return np.outer(a_r, a_t.conj()) * R


def _rician_weights(kappa: Optional[float]) -> Tuple[float, float]:
    if kappa is None or np.isinf(kappa):
        return 1.0, 0.0
    return float(np.sqrt(kappa / (kappa + 1))), float(np.sqrt(1 / (kappa + 1)))


def generate_si_channel(
    spec: SiChannelSpec,
    tx: ArrayGeometry,
    rx: ArrayGeometry,
    K: int,
    D: int,
    T_s: float,
    wavelength: float,
    rng: np.random.Generator,
    rolloff: float = 1.0,
) -> ChannelRealization:
    """
    Rician SI channel: frequency-flat near-field LOS plus cluster-ray NLOS.

    The NLOS part is normalized so that its expected energy matches the LOS
    matrix; the LOS/NLOS power ratio is then the Rician factor.
    """
    los = si_los_matrix(tx, rx, spec, wavelength)
    los_energy = float(np.sum(np.abs(los) ** 2))
    nlos_path_loss = rx.n_elements * tx.n_elements * pulse_energy(rolloff) / los_energy

    params = spec.nlos_params
    if params is None:
        params = draw_cluster_ray_params(spec.n_clusters, spec.n_rays, D * T_s, rng)
    nlos = generate_general_channel(
        tx, rx, params, K, D, T_s, nlos_path_loss, wavelength, rolloff=rolloff
    )

    w_los, w_nlos = _rician_weights(spec.rician_factor)
    h = w_los * los[None, :, :] + w_nlos * nlos.per_subcarrier
    return ChannelRealization(
        per_subcarrier=h,
        path_loss_linear=nlos_path_loss,
        params=params,
        steering_rx=nlos.steering_rx,
        steering_tx=nlos.steering_tx,
        path_gains=nlos.path_gains,
        los=los,
        rician_factor=spec.rician_factor,
    )


# ============================================================
# Regression dumps
# ============================================================

def dump_realization(realization: ChannelRealization, path) -> Path:
    """
    Write H[k] to `path`. `.json` gives row-major [re, im] pairs; anything
    else gives the little-endian binary layout (magic, <u4 shape, <f8 path
    loss, <c16 payload).
    """
    path = Path(path)
    h = realization.per_subcarrier
    try:
        if path.suffix == ".json":
            flat = h.ravel()
            payload = {
                "shape": list(h.shape),
                "path_loss_linear": realization.path_loss_linear,
                "data": np.stack([flat.real, flat.imag], axis=1).tolist(),
            }
            path.write_text(json.dumps(payload), encoding="utf-8")
        else:
            header = _BINARY_MAGIC + struct.pack("<3Id", *h.shape, realization.path_loss_linear)
            path.write_bytes(header + h.astype("<c16").tobytes(order="C"))
    except OSError as e:
        raise RuntimeError(f"Failed to write channel dump {path}: {e}") from e
    return path


def load_realization(path) -> ChannelRealization:
    path = Path(path)
    try:
        raw = path.read_bytes()
    except OSError as e:
        raise RuntimeError(f"Failed to read channel dump {path}: {e}") from e

    if path.suffix == ".json":
        payload = json.loads(raw.decode("utf-8"))
        pairs = np.asarray(payload["data"], dtype=float)
        h = (pairs[:, 0] + 1j * pairs[:, 1]).reshape(payload["shape"])
        return ChannelRealization(per_subcarrier=h, path_loss_linear=float(payload["path_loss_linear"]))

    if raw[:4] != _BINARY_MAGIC:
        raise ValueError(f"{path} is not a channel dump (bad magic)")
    header_size = 4 + struct.calcsize("<3Id")
    K, n_r, n_t, path_loss = struct.unpack("<3Id", raw[4:header_size])
    h = np.frombuffer(raw[header_size:], dtype="<c16").reshape(K, n_r, n_t)
    return ChannelRealization(per_subcarrier=h.astype(complex), path_loss_linear=path_loss)
