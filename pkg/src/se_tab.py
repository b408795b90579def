"""
Spectral Efficiency Tab - Tab 2
Backhaul / access SE sweeps, IBFD against HD
"""

import streamlit as st

from src.canceler_tab import render_downloads, render_run_controls
from src.config import ConfigError, load_config
from src.experiments import EXPERIMENTS, run_experiment
from src.results_io import rows_as_records

SE_EXPERIMENTS = ["fig4-backhaul", "fig4-access", "fig5-schemes", "fig6-rsi-sweep"]


def render_se_tab():
    st.header("📶 Spectral Efficiency")
    st.markdown("Seeded Monte-Carlo SE of the IAB-node links, IBFD against half-duplex")

    experiment = st.selectbox(
        "Experiment",
        SE_EXPERIMENTS,
        format_func=lambda e: f"{e} · {EXPERIMENTS[e]}",
    )
    seed, trials, desk = render_run_controls("se", default_trials=st.session_state.trials)

    rsi_axis = "sigma_e_si"
    if experiment == "fig6-rsi-sweep":
        rsi_axis = st.radio(
            "Residual-SI axis",
            ["sigma_e_si", "hwi"],
            format_func=lambda a: "SI estimation error" if a == "sigma_e_si" else "HWI (rho = beta)",
            horizontal=True,
        )

    if not desk:
        st.warning("Full-scale runs (K=512, 256-element arrays) can take a long time")

    if st.button("▶️ Run sweep", type="primary", use_container_width=True, key="se_run"):
        overrides = {"seed": seed, "trials": trials, "rsi_axis": rsi_axis}
        try:
            cfg = load_config(overrides=overrides, desk_scale=desk)
        except ConfigError as e:
            st.error(f"Configuration error: {e}")
            return
        with st.spinner(f"Running {experiment} over {trials} trials..."):
            try:
                st.session_state.se_result = run_experiment(experiment, cfg, quiet=True)
            except ValueError as e:
                st.error(f"Simulation failed: {e}")
                return

    result = st.session_state.get("se_result")
    if result is None:
        st.info("Pick an experiment and run the sweep")
        return

    st.caption(
        f"{result.experiment} · seed {result.seed} · config {result.config_hash} · "
        f"axes: {result.axis1_name} × {result.axis2_name}"
    )
    rows = result.mean_rows() or list(result.rows)
    st.dataframe(rows_as_records(rows), use_container_width=True, hide_index=True)

    crossovers = [r for r in rows if r.metric_name == "crossover_db"]
    for r in crossovers:
        if r.value == r.value:
            st.markdown(f"- `{r.axis2}`: IBFD drops below HD at **{r.value:.1f} dB**")
        else:
            st.markdown(f"- `{r.axis2}`: IBFD stays above HD over the whole grid")
    render_downloads(result, "se")
