"""
Simulation configuration.

Priority (highest wins): CLI flags > key=value config file > environment /
Streamlit secrets > built-in defaults (desk-scale preset when requested).
"""

import dataclasses
import hashlib
import logging
import os
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Optional, Tuple

import numpy as np
from dotenv import load_dotenv

from .channel import SPEED_OF_LIGHT, close_in_path_loss

logger = logging.getLogger(__name__)

load_dotenv()

THERMAL_NOISE_DBM_HZ = -174.0

# keys written as ROWSxCOLS in config files
_SHAPE_KEYS = {"N_T", "n_T", "n_R", "N_R"}

# execution-only settings, excluded from the config hash
_RUNTIME_KEYS = {"workers"}

# env var -> config key
_ENV_KEYS = {
    "IABSIM_SEED": "seed",
    "IABSIM_TRIALS": "trials",
    "IABSIM_WORKERS": "workers",
}


class ConfigError(ValueError):
    pass


# -----------------------------
# Secrets helper
# -----------------------------
def get_setting(name: str) -> Optional[str]:
    """
    Works on Streamlit Cloud (st.secrets) and locally (.env / env vars).
    """
    try:
        import streamlit as st
        if name in st.secrets:
            return str(st.secrets[name])
    except Exception:
        pass
    return os.getenv(name)


# ============================================================
# SimConfig
# ============================================================

@dataclass(frozen=True)
class SimConfig:
    # ---- OFDM / RF ----
    K: int = 512
    D: int = 128
    W: float = 400e6
    f_c: float = 28e9
    U: int = 4
    noise_figure_db: float = 10.0
    rolloff: float = 1.0

    # ---- arrays (rows, cols); N_R is one user's array ----
    N_T: Tuple[int, int] = (16, 16)
    n_T: Tuple[int, int] = (16, 16)
    n_R: Tuple[int, int] = (16, 16)
    N_R: Tuple[int, int] = (16, 4)
    # 0: twice U when n_R splits evenly; U: no extended receiver
    node_rx_chains: int = 0

    # ---- propagation ----
    r0: float = 1.0
    r_backhaul: float = 100.0
    r_access: float = 100.0
    mu: float = 3.4
    n_clusters: int = 8
    n_rays: int = 10
    angle_spread_deg: float = 5.0

    # ---- SI channel and SIC ----
    r_si: float = 0.1
    si_angle_deg: float = 30.0
    kappa_db: float = 10.0
    si_n_clusters: int = 2
    si_n_rays: int = 8
    isolation_db: float = 55.0
    analog_sic_db: float = 25.0

    # ---- impairments ----
    rho_db: float = -80.0
    beta_db: float = -80.0
    sigma_e_nd_db: float = -120.0
    sigma_e_si_db: float = -120.0
    sigma_e_en_db: float = -120.0
    estimation: str = "synthetic"

    # ---- codebooks ----
    codebook_bits: Tuple[int, ...] = (1, 4, 8)
    vector_bits: Tuple[int, ...] = (1, 2)
    scheme_bits: int = 8
    lbg_epsilon: float = 1e-3
    lbg_iterations: int = 50
    lbg_training: int = 4096

    # ---- sweeps ----
    snr_db: Tuple[float, ...] = (-10.0, -5.0, 0.0, 5.0, 10.0)
    rsi_snr_db: Tuple[float, ...] = (-5.0, 0.0, 5.0)
    rsi_axis: str = "sigma_e_si"
    rsi_grid_db: Tuple[float, ...] = (-140.0, -130.0, -120.0, -110.0, -100.0, -90.0, -80.0, -70.0, -60.0)

    # ---- analog canceler ----
    canceler_taps: Tuple[int, ...] = (10, 20, 40, 60, 80, 100)
    canceler_bandwidths_mhz: Tuple[float, ...] = (200.0, 300.0, 400.0)
    canceler_delay_spread_ns: float = 200.0
    canceler_pdp_decay_ns: float = 60.0
    canceler_step_mhz: float = 1.0
    canceler_trials: int = 20

    # ---- run control ----
    trials: int = 50
    seed: int = 0
    workers: int = 1
    desk_scale: bool = False

    def __post_init__(self):
        positives = ("K", "D", "W", "f_c", "U", "r0", "r_backhaul", "r_access", "r_si",
                     "mu", "trials", "canceler_trials", "canceler_delay_spread_ns", "canceler_pdp_decay_ns",
                     "lbg_iterations", "lbg_training", "workers")
        for name in positives:
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be positive, got {getattr(self, name)}")
        if self.D > self.K:
            raise ConfigError(f"cyclic prefix D={self.D} exceeds K={self.K}")
        for name in ("N_T", "n_T", "n_R"):
            rows, cols = getattr(self, name)
            if rows < 1 or cols < 1 or cols % self.U:
                raise ConfigError(f"{name}={rows}x{cols} cannot be split into U={self.U} subarrays")
        if self.node_rx_chains < 0:
            raise ConfigError(f"node_rx_chains must be >= 0, got {self.node_rx_chains}")
        rx = self.node_rx_chains
        if rx and (rx < self.U or rx % self.U or self.n_R[1] % rx):
            raise ConfigError(
                f"node_rx_chains={rx} must be a multiple of U={self.U} that splits n_R={self.n_R[0]}x{self.n_R[1]}"
            )
        if self.r_backhaul < self.r0 or self.r_access < self.r0:
            raise ConfigError("link distances must be at least the reference distance r0")
        if self.estimation not in ("synthetic", "ls"):
            raise ConfigError(f"estimation must be 'synthetic' or 'ls', got {self.estimation!r}")
        if self.rsi_axis not in ("sigma_e_si", "hwi"):
            raise ConfigError(f"rsi_axis must be 'sigma_e_si' or 'hwi', got {self.rsi_axis!r}")
        if not 0 < self.lbg_epsilon < 0.1:
            raise ConfigError(f"lbg_epsilon must lie in (0, 0.1), got {self.lbg_epsilon}")

    # ---- derived quantities ----
    @property
    def wavelength(self) -> float:
        return SPEED_OF_LIGHT / self.f_c

    @property
    def T_s(self) -> float:
        return 1.0 / self.W

    @property
    def noise_var(self) -> float:
        """Thermal noise power per sample in watts."""
        dbm = THERMAL_NOISE_DBM_HZ + 10 * np.log10(self.W) + self.noise_figure_db
        return 10 ** ((dbm - 30) / 10)

    @property
    def extended_rx_chains(self) -> int:
        """RF chains of the extended node receiver, or 0 when it is not evaluated."""
        if self.node_rx_chains:
            return self.node_rx_chains if self.node_rx_chains > self.U else 0
        chains = 2 * self.U
        return chains if self.n_R[1] % chains == 0 else 0

    @property
    def kappa(self) -> float:
        return 10 ** (self.kappa_db / 10)

    def path_loss(self, r: float) -> float:
        return close_in_path_loss(r, self.r0, self.wavelength, self.mu)

    def replace(self, **changes) -> "SimConfig":
        return dataclasses.replace(self, **changes)


DESK_SCALE = dict(
    K=64,
    D=16,
    U=2,
    N_T=(8, 4),
    n_T=(8, 4),
    n_R=(8, 4),
    N_R=(8, 2),
    desk_scale=True,
)


def desk_scale_config(**overrides) -> SimConfig:
    """K=64, D=16, U=2 with 8x2 subarrays."""
    return SimConfig(**{**DESK_SCALE, **overrides})


# ============================================================
# key=value parsing
# ============================================================

def _parse_value(key: str, raw: str, default):
    raw = raw.strip()
    if key in _SHAPE_KEYS:
        parts = raw.lower().split("x")
        if len(parts) != 2:
            raise ValueError(f"expected ROWSxCOLS, got {raw!r}")
        return int(parts[0]), int(parts[1])
    if isinstance(default, bool):
        lowered = raw.lower()
        if lowered in ("1", "true", "yes", "on"):
            return True
        if lowered in ("0", "false", "no", "off"):
            return False
        raise ValueError(f"expected a boolean, got {raw!r}")
    if isinstance(default, tuple):
        item = type(default[0]) if default else float
        return tuple(item(v) for v in raw.split(",") if v.strip())
    return type(default)(raw)


def parse_overrides(pairs: Dict[str, str], source: str = "<overrides>") -> Dict:
    """Typed values for raw string pairs; unknown keys are rejected."""
    defaults = {f.name: f.default for f in dataclasses.fields(SimConfig)}
    out = {}
    for key, raw in pairs.items():
        if key not in defaults:
            raise ConfigError(f"{source}: unknown key {key!r}")
        try:
            out[key] = _parse_value(key, raw, defaults[key])
        except ValueError as e:
            raise ConfigError(f"{source}: bad value for {key!r}: {e}") from e
    return out


def parse_config_text(text: str, source: str = "<string>") -> Dict:
    pairs = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected key=value, got {line!r}")
        key, raw = line.split("=", 1)
        pairs[key.strip()] = raw
    return parse_overrides(pairs, source)


def _env_overrides() -> Dict:
    pairs = {}
    for env_name, key in _ENV_KEYS.items():
        value = get_setting(env_name)
        if value:
            pairs[key] = value
    return parse_overrides(pairs, "environment")


def load_config(
    path: Optional[str] = None,
    overrides: Optional[Dict] = None,
    desk_scale: Optional[bool] = None,
) -> SimConfig:
    """
    Merge defaults, environment, config file and typed CLI overrides.

    `path` falls back to IABSIM_CONFIG when unset.
    """
    overrides = dict(overrides or {})
    path = path or get_setting("IABSIM_CONFIG")

    file_values: Dict = {}
    if path:
        try:
            text = Path(path).read_text(encoding="utf-8")
        except OSError as e:
            raise ConfigError(f"cannot read config file {path}: {e}") from e
        file_values = parse_config_text(text, source=str(path))

    env_values = _env_overrides()

    def pick(key: str, fallback):
        for layer in (overrides, file_values, env_values):
            if key in layer and layer[key] is not None:
                return layer[key]
        return fallback

    desk = desk_scale if desk_scale is not None else pick("desk_scale", False)
    base = dict(DESK_SCALE) if desk else {}
    merged = {**base, **env_values, **file_values, **{k: v for k, v in overrides.items() if v is not None}}
    merged["desk_scale"] = bool(desk)
    try:
        cfg = SimConfig(**merged)
    except TypeError as e:
        raise ConfigError(str(e)) from e
    logger.debug(f"[Config] loaded (desk_scale={cfg.desk_scale}, hash={config_hash(cfg)})")
    return cfg


def render_config(cfg: SimConfig) -> str:
    """Canonical key=value text, keys sorted; the worker count does not affect results and is left out."""
    lines = []
    for f in sorted(dataclasses.fields(cfg), key=lambda f: f.name):
        if f.name in _RUNTIME_KEYS:
            continue
        value = getattr(cfg, f.name)
        if f.name in _SHAPE_KEYS:
            text = f"{value[0]}x{value[1]}"
        elif isinstance(value, tuple):
            text = ",".join(repr(v) for v in value)
        else:
            text = repr(value)
        lines.append(f"{f.name}={text}")
    return "\n".join(lines) + "\n"


def config_hash(cfg: SimConfig) -> str:
    return hashlib.sha256(render_config(cfg).encode("utf-8")).hexdigest()[:16]
