"""
Experiment catalog and Monte-Carlo orchestration.

Every experiment is a deterministic grid sweep. Randomness comes from
per-(trial, link) streams split off the master seed, so trials can run in
any order or in parallel and still merge into identical results.
"""

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import partial
from typing import Callable, Dict, List, Sequence, Tuple, Union

import numpy as np
from tqdm import tqdm

from .canceler import PROFILES, SiBandModel, cancellation_trials
from .channel import (
    ArrayGeometry,
    ChannelRealization,
    SiChannelSpec,
    draw_cluster_ray_params,
    generate_general_channel,
    generate_si_channel,
)
from .codebook import Codebook, LbgConfig, Layout, random_phase_training, train_codebook, train_vector_codebook_baseline
from .config import SimConfig, config_hash
from .link_estimation import (
    PilotBlock,
    beam_sweep_select,
    estimate_effective_channel,
    fully_connected_rf_beamformer,
    ideal_rf_beamformer,
    inject_estimation_error,
    ls_error_variance,
    transmit_pilots,
)
from .se_metrics import access_sum_se, backhaul_se, crossover_point, hd_baseline
from .transceiver import (
    ErrorVariances,
    HwiConfig,
    SicBudget,
    bb_precoder_svd,
    bb_precoder_zf,
    build_covariances_access,
    build_covariances_backhaul,
    effective_channel,
    mmse_combiner,
)

logger = logging.getLogger(__name__)

# ---- random stream ids ----
STREAM_ND = 0
STREAM_SI = 1
STREAM_EN = 2
STREAM_SWEEP = 3
STREAM_ERROR = 4
STREAM_CANCELER = 5
STREAM_CODEBOOK = 6

# trial slot reserved for per-experiment (not per-trial) streams
SHARED_TRIAL = 2 ** 32 - 1

EXPERIMENTS = {
    "fig3-microstrip": "Analog canceler with micro-strip delay lines: cancellation over bandwidth x tap count",
    "fig3-od": "Analog canceler with optical (FBG) delay lines: cancellation over bandwidth x tap count",
    "fig4-backhaul": "Backhaul SE over SNR for matrix, vector and infinite-resolution RF codebooks, IBFD and HD",
    "fig4-access": "Access sum SE over SNR for matrix, vector and infinite-resolution RF codebooks, IBFD and HD",
    "fig5-schemes": "Backhaul SE over SNR for fully connected / subarray ideal and subarray codebook beamforming",
    "fig6-rsi-sweep": "Backhaul SE over the residual-SI level per codebook size and SNR, with IBFD/HD crossover",
}


class UnknownExperimentError(KeyError):
    def __init__(self, experiment_id: str):
        self.experiment_id = experiment_id
        super().__init__(f"unknown experiment {experiment_id!r}; known: {', '.join(EXPERIMENTS)}")

    def __str__(self) -> str:
        return self.args[0]


# ============================================================
# Result types
# ============================================================

@dataclass(frozen=True)
class ResultRow:
    trial: str  # trial index, or "mean"
    axis1: Union[float, str]
    axis2: str
    metric_name: str
    value: float


@dataclass(frozen=True)
class ExperimentResult:
    experiment: str
    axis1_name: str
    axis2_name: str
    axis1_values: Tuple
    axis2_values: Tuple[str, ...]
    rows: Tuple[ResultRow, ...]
    seed: int
    config_hash: str

    def mean_rows(self) -> List[ResultRow]:
        return [r for r in self.rows if r.trial == "mean"]


def stream(seed: int, *key: int) -> np.random.Generator:
    """Independent generator for a (trial, link, ...) key under the master seed."""
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=tuple(int(k) for k in key)))


def transmit_power(snr: float, noise_var: float, K: int, U: int, path_loss: float) -> float:
    """P_t = snr * sigma^2 * K * U * PL, snr linear."""
    if snr < 0:
        raise ValueError(f"SNR must be >= 0 (linear), got {snr}")
    return snr * noise_var * K * U * path_loss


def snr_to_transmit_power(snr: float, cfg: SimConfig) -> float:
    """Transmit power for a linear SNR, using the backhaul path loss."""
    return transmit_power(snr, cfg.noise_var, cfg.K, cfg.U, cfg.path_loss(cfg.r_backhaul))


# ============================================================
# Scene: arrays and channels of one trial
# ============================================================

@dataclass(frozen=True)
class Scene:
    donor: ArrayGeometry
    node_rx: ArrayGeometry
    node_tx: ArrayGeometry
    h_nd: ChannelRealization
    h_si: ChannelRealization
    h_en: ChannelRealization  # users stacked along the receive axis

    @property
    def layouts(self) -> Dict[str, Layout]:
        return self.layouts_for()

    def layouts_for(self, rx_chains: int = 0) -> Dict[str, Layout]:
        """
        RF layouts per side. With rx_chains > U each node-receiver subarray
        is cut into rx_chains / U consecutive element blocks.
        """
        U = self.donor.n_subarrays
        n_ue = self.h_en.shape[0]
        return {
            "donor": Layout(self.donor.n_elements, U),
            "node_rx": Layout(self.node_rx.n_elements, rx_chains or U),
            "node_tx": Layout(self.node_tx.n_elements, U),
            "ue": Layout(n_ue, U),
        }


def build_scene(cfg: SimConfig, trial: int) -> Scene:
    lam = cfg.wavelength
    spacing = lam / 2
    donor = ArrayGeometry.upa(*cfg.N_T, spacing, cfg.U)
    node_rx = ArrayGeometry.upa(*cfg.n_R, spacing, cfg.U)
    node_tx = ArrayGeometry.upa(*cfg.n_T, spacing, cfg.U)
    user = ArrayGeometry.upa(*cfg.N_R, spacing, 1)
    spread = np.deg2rad(cfg.angle_spread_deg)
    span = cfg.D * cfg.T_s

    rng = stream(cfg.seed, trial, STREAM_ND)
    params = draw_cluster_ray_params(cfg.n_clusters, cfg.n_rays, span, rng, spread)
    h_nd = generate_general_channel(
        donor, node_rx, params, cfg.K, cfg.D, cfg.T_s, cfg.path_loss(cfg.r_backhaul), lam, rolloff=cfg.rolloff
    )

    rng = stream(cfg.seed, trial, STREAM_SI)
    spec = SiChannelSpec(
        rician_factor=cfg.kappa,
        tx_rx_separation=cfg.r_si,
        separation_angle=np.deg2rad(cfg.si_angle_deg),
        n_clusters=cfg.si_n_clusters,
        n_rays=cfg.si_n_rays,
    )
    h_si = generate_si_channel(spec, node_tx, node_rx, cfg.K, cfg.D, cfg.T_s, lam, rng, rolloff=cfg.rolloff)

    rng = stream(cfg.seed, trial, STREAM_EN)
    access_loss = cfg.path_loss(cfg.r_access)
    per_user = []
    for _ in range(cfg.U):
        params = draw_cluster_ray_params(cfg.n_clusters, cfg.n_rays, span, rng, spread)
        h = generate_general_channel(node_tx, user, params, cfg.K, cfg.D, cfg.T_s, access_loss, lam, rolloff=cfg.rolloff)
        per_user.append(h.per_subcarrier)
    h_en = ChannelRealization(per_subcarrier=np.concatenate(per_user, axis=1), path_loss_linear=access_loss)

    return Scene(donor=donor, node_rx=node_rx, node_tx=node_tx, h_nd=h_nd, h_si=h_si, h_en=h_en)


# ============================================================
# Grid cells and RF selection
# ============================================================

@dataclass(frozen=True)
class Impairments:
    hwi: HwiConfig = field(default_factory=HwiConfig)
    errors: ErrorVariances = field(default_factory=ErrorVariances)
    sic: SicBudget = field(default_factory=SicBudget)

    @property
    def eta(self) -> float:
        return self.sic.eta

    @staticmethod
    def sic_budget(cfg: SimConfig) -> SicBudget:
        return SicBudget(isolation_db=cfg.isolation_db, analog_db=cfg.analog_sic_db)

    @classmethod
    def ideal(cls, cfg: SimConfig) -> "Impairments":
        """Perfect CSI, no HWI; the SIC budget still applies."""
        return cls(sic=cls.sic_budget(cfg))

    @classmethod
    def from_config(cls, cfg: SimConfig, **db_overrides) -> "Impairments":
        values = dict(
            rho_db=cfg.rho_db, beta_db=cfg.beta_db, sigma_e_nd_db=cfg.sigma_e_nd_db,
            sigma_e_si_db=cfg.sigma_e_si_db, sigma_e_en_db=cfg.sigma_e_en_db,
        )
        values.update(db_overrides)
        return cls(
            hwi=HwiConfig.from_db(values["rho_db"], values["beta_db"]),
            errors=ErrorVariances.from_db(values["sigma_e_nd_db"], values["sigma_e_si_db"], values["sigma_e_en_db"]),
            sic=cls.sic_budget(cfg),
        )


@dataclass(frozen=True)
class Cell:
    axis1: Union[float, str]
    axis2: str
    scheme: str  # "matrix" | "vector" | "ideal" | "fully-connected"
    bits: int
    snr_db: float
    impairments: Impairments
    rx_chains: int = 0  # node-receiver RF chains; 0 keeps U

    @property
    def rf_key(self) -> Tuple:
        # beams are swept under the cell's HWI, so an HWI sweep re-selects them
        return self.scheme, self.bits, self.snr_db, self.impairments.hwi, self.rx_chains


@dataclass(frozen=True)
class RfSet:
    f_rfd: np.ndarray
    w_rfn: np.ndarray
    f_rfn: np.ndarray
    w_rfe: np.ndarray


# codebooks keyed by (scheme, bits, n_elements, n_blocks)
CodebookKey = Tuple[str, int, int, int]


def codebook_key(scheme: str, bits: int, layout: Layout) -> CodebookKey:
    return scheme, bits, layout.n_elements, layout.n_blocks


def train_codebooks(cfg: SimConfig, keys: Sequence[CodebookKey]) -> Dict[CodebookKey, Codebook]:
    """
    Matrix codebooks and expanded vector codebooks, trained once per experiment.

    A matrix codebook of B bits and the vector codebook of the same layout
    share one training set.
    """
    lbg = LbgConfig(epsilon=cfg.lbg_epsilon, iterations=cfg.lbg_iterations, training_size=cfg.lbg_training)
    books: Dict[CodebookKey, Codebook] = {}
    for key in sorted(set(keys)):
        scheme, bits, n, u = key
        layout = Layout(n, u)
        rng = stream(cfg.seed, SHARED_TRIAL, STREAM_CODEBOOK, n, u)
        training = random_phase_training(layout, cfg.lbg_training, rng)
        rng = stream(cfg.seed, SHARED_TRIAL, STREAM_CODEBOOK, n, u, bits, scheme == "vector")
        if scheme == "matrix":
            books[key] = train_codebook(lbg, layout, bits, rng, training=training)
        elif scheme == "vector":
            books[key] = train_vector_codebook_baseline(lbg, layout, bits, rng, training=training).as_matrix_codebook()
        else:
            raise ValueError(f"no codebook for scheme {scheme!r}")
    return books


def select_rf(
    cfg: SimConfig,
    scene: Scene,
    cell: Cell,
    books: Dict[CodebookKey, Codebook],
    rng: np.random.Generator,
) -> RfSet:
    """RF beamformers for both hops: EVD references, or exhaustive codebook sweeps."""
    layouts = scene.layouts_for(cell.rx_chains)
    if cell.scheme == "ideal":
        return RfSet(
            f_rfd=ideal_rf_beamformer(scene.h_nd, layouts["donor"], "tx"),
            w_rfn=ideal_rf_beamformer(scene.h_nd, layouts["node_rx"], "rx"),
            f_rfn=ideal_rf_beamformer(scene.h_en, layouts["node_tx"], "tx"),
            w_rfe=ideal_rf_beamformer(scene.h_en, layouts["ue"], "rx"),
        )
    if cell.scheme == "fully-connected":
        return RfSet(
            f_rfd=fully_connected_rf_beamformer(scene.h_nd, cfg.U, "tx"),
            w_rfn=fully_connected_rf_beamformer(scene.h_nd, cfg.U, "rx"),
            # users keep their own arrays
            f_rfn=fully_connected_rf_beamformer(scene.h_en, cfg.U, "tx"),
            w_rfe=ideal_rf_beamformer(scene.h_en, layouts["ue"], "rx"),
        )

    def book(side: str) -> Codebook:
        return books[codebook_key(cell.scheme, cell.bits, layouts[side])]

    zeta = snr_to_transmit_power(10 ** (cell.snr_db / 10), cfg) / (cfg.K * cfg.U)
    pilots = PilotBlock.dft(cfg.K, cfg.U, zeta)
    hwi = cell.impairments.hwi
    p, q = beam_sweep_select(book("donor"), book("node_rx"), scene.h_nd, pilots, hwi, cfg.noise_var, rng)
    p2, q2 = beam_sweep_select(book("node_tx"), book("ue"), scene.h_en, pilots, hwi, cfg.noise_var, rng)
    return RfSet(
        f_rfd=book("donor").codeword(p).matrix,
        w_rfn=book("node_rx").codeword(q).matrix,
        f_rfn=book("node_tx").codeword(p2).matrix,
        w_rfe=book("ue").codeword(q2).matrix,
    )


# ============================================================
# One link evaluation
# ============================================================

def _estimate(
    cfg: SimConfig,
    h_eff: np.ndarray,
    link: str,
    error_variance: float,
    pilots: PilotBlock,
    imp: Impairments,
    combiner_gain: float,
    rng: np.random.Generator,
) -> Tuple[np.ndarray, float]:
    """(estimate, per-entry error variance) under the configured estimation mode."""
    if cfg.estimation == "ls":
        noise = cfg.noise_var * combiner_gain
        received = transmit_pilots(h_eff, pilots, imp.hwi, noise, rng)
        variance = ls_error_variance(noise, pilots.zeta)
        return estimate_effective_channel(received, pilots, link, variance).channel, variance
    return inject_estimation_error(h_eff, error_variance, rng, link).channel, error_variance


def evaluate_link(
    cfg: SimConfig,
    scene: Scene,
    rf: RfSet,
    snr_db: float,
    imp: Impairments,
    rng: np.random.Generator,
) -> Dict[str, float]:
    """Backhaul and access SE, IBFD and HD, for fixed RF beamformers."""
    zeta = snr_to_transmit_power(10 ** (snr_db / 10), cfg) / (cfg.K * cfg.U)
    pilots = PilotBlock.dft(cfg.K, cfg.U, zeta)

    h_nd = effective_channel(rf.w_rfn, scene.h_nd.per_subcarrier, rf.f_rfd)
    h_si = effective_channel(rf.w_rfn, scene.h_si.per_subcarrier, rf.f_rfn, np.sqrt(imp.eta))
    h_en = effective_channel(rf.w_rfe, scene.h_en.per_subcarrier, rf.f_rfn)

    node_gain = float(np.max(np.sum(np.abs(rf.w_rfn) ** 2, axis=0)))
    ue_gain = float(np.max(np.sum(np.abs(rf.w_rfe) ** 2, axis=0)))
    h_nd_hat, e_nd = _estimate(cfg, h_nd, "ND", imp.errors.nd, pilots, imp, node_gain, rng)
    h_si_hat, e_si = _estimate(cfg, h_si, "SI", imp.errors.si, pilots, imp, node_gain, rng)
    h_en_hat, e_en = _estimate(cfg, h_en, "EN", imp.errors.en, pilots, imp, ue_gain, rng)
    errors = ErrorVariances(nd=e_nd, si=e_si, en=e_en)

    f_bbd = bb_precoder_svd(h_nd_hat, rf.f_rfd)
    f_bbn = bb_precoder_zf(h_en_hat, rf.f_rfn)

    back = build_covariances_backhaul(h_nd_hat, h_si_hat, f_bbd, f_bbn, imp.hwi, errors, cfg.noise_var, rf.w_rfn, zeta)
    w_bbn = mmse_combiner(h_nd_hat, f_bbd, back.phi, back.omega, zeta)
    access = build_covariances_access(h_en_hat, f_bbn, imp.hwi, errors.en, cfg.noise_var, rf.w_rfe, zeta)

    return {
        "se_backhaul_ibfd": backhaul_se(back.phi, back.omega, w_bbn).mean,
        "se_backhaul_hd": hd_baseline(back, w_bbn).mean,
        "se_access_ibfd": access_sum_se(access.phi, access.omega).mean,
        "se_access_hd": hd_baseline(access).mean,
    }


def run_se_trial(
    trial: int,
    cfg: SimConfig,
    cells: Sequence[Cell],
    books: Dict[CodebookKey, Codebook],
) -> List[Dict[str, float]]:
    """All cells of one trial on a shared scene; RF selections are reused across cells with the same key."""
    scene = build_scene(cfg, trial)
    rf_cache: Dict[Tuple, RfSet] = {}
    out = []
    for index, cell in enumerate(cells):
        if cell.rf_key not in rf_cache:
            sweep_rng = stream(cfg.seed, trial, STREAM_SWEEP, len(rf_cache))
            rf_cache[cell.rf_key] = select_rf(cfg, scene, cell, books, sweep_rng)
        rng = stream(cfg.seed, trial, STREAM_ERROR, index)
        out.append(evaluate_link(cfg, scene, rf_cache[cell.rf_key], cell.snr_db, cell.impairments, rng))
    return out


def run_canceler_trial(trial: int, cfg: SimConfig, profile_name: str) -> np.ndarray:
    """(n_bandwidths, n_taps) cancellation for one SI realization."""
    model = SiBandModel(
        delay_spread=cfg.canceler_delay_spread_ns * 1e-9,
        pdp_decay=cfg.canceler_pdp_decay_ns * 1e-9,
        rician_factor=cfg.kappa,
        n_clusters=cfg.si_n_clusters,
        n_rays=cfg.si_n_rays,
        isolation_db=cfg.isolation_db,
        los_distance=cfg.r_si,
    )
    rng = stream(cfg.seed, trial, STREAM_CANCELER)
    grid = cancellation_trials(
        PROFILES[profile_name],
        list(cfg.canceler_taps),
        [bw * 1e6 for bw in cfg.canceler_bandwidths_mhz],
        model,
        trials=1,
        rng=rng,
        center_hz=cfg.f_c,
        step_hz=cfg.canceler_step_mhz * 1e6,
    )
    return grid[0]


def _map_trials(fn: Callable, n_trials: int, cfg: SimConfig, desc: str, quiet: bool) -> List:
    """Runs fn(trial) for every trial; results come back in trial order."""
    trials = range(n_trials)
    bar = dict(total=n_trials, desc=desc, disable=True if quiet else None, leave=False)
    if cfg.workers > 1 and n_trials > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            return list(tqdm(pool.map(fn, trials), **bar))
    return [fn(t) for t in tqdm(trials, **bar)]


# ============================================================
# Grids
# ============================================================

def _codebook_schemes(cfg: SimConfig) -> List[Tuple[str, int, str]]:
    """(scheme, bits, label) per codebook kind; matrix bits U*b pair with vector bits b."""
    kinds = [("matrix", cfg.U * b, f"matrix-{cfg.U * b}b") for b in cfg.vector_bits]
    kinds += [("vector", b, f"vector-{b}b") for b in cfg.vector_bits]
    kinds.append(("ideal", 0, "ideal"))
    return kinds


def _fig4_cells(cfg: SimConfig) -> List[Cell]:
    imp = Impairments.ideal(cfg)
    return [
        Cell(axis1=snr, axis2=label, scheme=scheme, bits=bits, snr_db=snr, impairments=imp)
        for snr in cfg.snr_db
        for scheme, bits, label in _codebook_schemes(cfg)
    ]


def _fig5_cells(cfg: SimConfig) -> List[Cell]:
    ideal = Impairments.ideal(cfg)
    impaired = Impairments.from_config(cfg)
    codebook = f"subarray-codebook-{cfg.scheme_bits}b"
    rx = cfg.extended_rx_chains
    cells = []
    for snr in cfg.snr_db:
        cells.append(Cell(snr, "fully-connected-ideal", "fully-connected", 0, snr, ideal))
        cells.append(Cell(snr, "subarray-ideal", "ideal", 0, snr, ideal))
        cells.append(Cell(snr, codebook, "matrix", cfg.scheme_bits, snr, impaired))
        # EVD beams under the same RSI: residual SI without codebook quantization
        cells.append(Cell(snr, "subarray-ideal-impaired", "ideal", 0, snr, impaired))
        if rx:
            cells.append(Cell(snr, f"subarray-ideal-rx{rx}", "ideal", 0, snr, ideal, rx_chains=rx))
            cells.append(Cell(snr, f"{codebook}-rx{rx}", "matrix", cfg.scheme_bits, snr, impaired, rx_chains=rx))
    return cells


def _rsi_label(bits: int, snr: float) -> str:
    return f"bits={bits}|snr_db={snr:g}"


def _fig6_cells(cfg: SimConfig) -> List[Cell]:
    cells = []
    for bits in cfg.codebook_bits:
        for snr in cfg.rsi_snr_db:
            for level in cfg.rsi_grid_db:
                if cfg.rsi_axis == "hwi":
                    imp = Impairments.from_config(cfg, rho_db=level, beta_db=level)
                else:
                    imp = Impairments.from_config(cfg, sigma_e_si_db=level)
                cells.append(Cell(level, _rsi_label(bits, snr), "matrix", bits, snr, imp))
    return cells


def _codebook_keys(cfg: SimConfig, cells: Sequence[Cell]) -> List[CodebookKey]:
    n_ue = cfg.U * cfg.N_R[0] * cfg.N_R[1]
    keys = []
    for c in cells:
        if c.scheme not in ("matrix", "vector"):
            continue
        sides = [
            Layout(cfg.N_T[0] * cfg.N_T[1], cfg.U),
            Layout(cfg.n_R[0] * cfg.n_R[1], c.rx_chains or cfg.U),
            Layout(cfg.n_T[0] * cfg.n_T[1], cfg.U),
            Layout(n_ue, cfg.U),
        ]
        keys += [codebook_key(c.scheme, c.bits, layout) for layout in sides]
    return keys


# ============================================================
# Runners
# ============================================================

def _mean_rows(cells_axes: Sequence[Tuple], per_trial: np.ndarray, metrics: Sequence[str]) -> List[ResultRow]:
    means = per_trial.mean(axis=0)
    return [
        ResultRow("mean", a1, a2, name, float(means[i, j]))
        for i, (a1, a2) in enumerate(cells_axes)
        for j, name in enumerate(metrics)
    ]


def _trial_rows(cells_axes: Sequence[Tuple], per_trial: np.ndarray, metrics: Sequence[str]) -> List[ResultRow]:
    return [
        ResultRow(str(t), a1, a2, name, float(per_trial[t, i, j]))
        for t in range(per_trial.shape[0])
        for i, (a1, a2) in enumerate(cells_axes)
        for j, name in enumerate(metrics)
    ]


def _run_canceler(experiment: str, cfg: SimConfig, quiet: bool) -> ExperimentResult:
    profile = "microstrip" if experiment == "fig3-microstrip" else "fbg"
    fn = partial(run_canceler_trial, cfg=cfg, profile_name=profile)
    grids = np.stack(_map_trials(fn, cfg.canceler_trials, cfg, experiment, quiet))  # (T, n_bw, n_taps)

    axes = [(bw, str(m)) for bw in cfg.canceler_bandwidths_mhz for m in cfg.canceler_taps]
    per_trial = grids.reshape(grids.shape[0], len(axes), 1)
    rows = _trial_rows(axes, per_trial, ["cancellation_db"])
    if cfg.canceler_trials > 1:
        rows += _mean_rows(axes, per_trial, ["cancellation_db"])
    return ExperimentResult(
        experiment=experiment,
        axis1_name="bandwidth_mhz",
        axis2_name="taps",
        axis1_values=tuple(cfg.canceler_bandwidths_mhz),
        axis2_values=tuple(str(m) for m in cfg.canceler_taps),
        rows=tuple(rows),
        seed=cfg.seed,
        config_hash=config_hash(cfg),
    )


def _se_metrics(experiment: str) -> Tuple[List[str], List[str]]:
    """(source keys, output metric names)."""
    if experiment == "fig4-access":
        return ["se_access_ibfd", "se_access_hd"], ["se_ibfd", "se_hd"]
    return ["se_backhaul_ibfd", "se_backhaul_hd"], ["se_ibfd", "se_hd"]


def _crossover_rows(cells: Sequence[Cell], means: np.ndarray) -> List[ResultRow]:
    rows = []
    for label in dict.fromkeys(c.axis2 for c in cells):
        idx = [i for i, c in enumerate(cells) if c.axis2 == label]
        axis = [cells[i].axis1 for i in idx]
        point = crossover_point(axis, means[idx, 0], means[idx, 1])
        rows.append(ResultRow("mean", "", label, "crossover_db", float("nan") if point is None else point))
        logger.info(f"[RSI] {label}: crossover at {point if point is not None else 'none'}")
    return rows


def _run_se(experiment: str, cfg: SimConfig, quiet: bool) -> ExperimentResult:
    cells = {
        "fig4-backhaul": _fig4_cells,
        "fig4-access": _fig4_cells,
        "fig5-schemes": _fig5_cells,
        "fig6-rsi-sweep": _fig6_cells,
    }[experiment](cfg)
    books = train_codebooks(cfg, _codebook_keys(cfg, cells))
    keys, names = _se_metrics(experiment)

    fn = partial(run_se_trial, cfg=cfg, cells=cells, books=books)
    per_trial = np.array([
        [[result[k] for k in keys] for result in trial]
        for trial in _map_trials(fn, cfg.trials, cfg, experiment, quiet)
    ])  # (T, n_cells, n_metrics)

    axes = [(c.axis1, c.axis2) for c in cells]
    rows = _trial_rows(axes, per_trial, names)
    if cfg.trials > 1:
        rows += _mean_rows(axes, per_trial, names)
        if experiment == "fig6-rsi-sweep":
            rows += _crossover_rows(cells, per_trial.mean(axis=0))

    axis1_name = {"fig6-rsi-sweep": f"{cfg.rsi_axis}_db"}.get(experiment, "snr_db")
    axis2_name = {"fig4-backhaul": "codebook", "fig4-access": "codebook", "fig5-schemes": "scheme"}.get(
        experiment, "bits_snr"
    )
    return ExperimentResult(
        experiment=experiment,
        axis1_name=axis1_name,
        axis2_name=axis2_name,
        axis1_values=tuple(dict.fromkeys(c.axis1 for c in cells)),
        axis2_values=tuple(dict.fromkeys(c.axis2 for c in cells)),
        rows=tuple(rows),
        seed=cfg.seed,
        config_hash=config_hash(cfg),
    )


def run_experiment(experiment: str, cfg: SimConfig, quiet: bool = False) -> ExperimentResult:
    """Run one catalog experiment; raises UnknownExperimentError for other ids."""
    if experiment not in EXPERIMENTS:
        raise UnknownExperimentError(experiment)
    logger.info(
        f"[Experiment] {experiment}: seed={cfg.seed}, trials={cfg.trials}, "
        f"desk_scale={cfg.desk_scale}, workers={cfg.workers}"
    )
    if experiment.startswith("fig3-"):
        result = _run_canceler(experiment, cfg, quiet)
    else:
        result = _run_se(experiment, cfg, quiet)
    logger.info(f"[Experiment] {experiment}: {len(result.rows)} rows (hash {result.config_hash})")
    return result
