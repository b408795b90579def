"""
Analog Canceler Tab - Tab 1
Run the micro-strip / optical canceler sweeps and download the results
"""

import streamlit as st

from src.config import ConfigError, load_config
from src.experiments import EXPERIMENTS, run_experiment
from src.results_io import emit_results, rows_as_records

CANCELER_EXPERIMENTS = ["fig3-od", "fig3-microstrip"]


def render_run_controls(prefix: str, default_trials: int):
    """Seed / trials / desk-scale inputs shared by both tabs."""
    col1, col2, col3 = st.columns(3)
    with col1:
        seed = st.number_input("Seed", min_value=0, value=st.session_state.seed, step=1, key=f"{prefix}_seed")
    with col2:
        trials = st.number_input("Trials", min_value=1, value=default_trials, step=1, key=f"{prefix}_trials")
    with col3:
        desk = st.checkbox("Desk scale", value=st.session_state.desk_scale, key=f"{prefix}_desk",
                           help="K=64, D=16, U=2 with 8x2 subarrays")
    return int(seed), int(trials), bool(desk)


def render_downloads(result, prefix: str):
    col1, col2 = st.columns(2)
    with col1:
        st.download_button(
            "⬇️ Download CSV",
            data=emit_results(result, "csv").encode("utf-8"),
            file_name=f"{result.experiment}_seed{result.seed}.csv",
            mime="text/csv",
            key=f"{prefix}_csv",
            use_container_width=True,
        )
    with col2:
        st.download_button(
            "⬇️ Download JSON",
            data=emit_results(result, "json").encode("utf-8"),
            file_name=f"{result.experiment}_seed{result.seed}.json",
            mime="application/json",
            key=f"{prefix}_json",
            use_container_width=True,
        )


def render_canceler_tab():
    st.header("📡 Analog SI Canceler")
    st.markdown("Cancellation of a multi-tap analog canceler over bandwidth and tap count")

    experiment = st.selectbox(
        "Delay-line technology",
        CANCELER_EXPERIMENTS,
        format_func=lambda e: EXPERIMENTS[e],
    )
    seed, trials, desk = render_run_controls("canceler", default_trials=20)

    if st.button("▶️ Run sweep", type="primary", use_container_width=True, key="canceler_run"):
        try:
            cfg = load_config(overrides={"seed": seed, "canceler_trials": trials}, desk_scale=desk)
        except ConfigError as e:
            st.error(f"Configuration error: {e}")
            return
        with st.spinner(f"Fitting canceler weights over {trials} SI realizations..."):
            st.session_state.canceler_result = run_experiment(experiment, cfg, quiet=True)

    result = st.session_state.get("canceler_result")
    if result is None:
        st.info("Choose a technology and run the sweep")
        return

    st.caption(f"{result.experiment} · seed {result.seed} · config {result.config_hash}")
    rows = result.mean_rows() or list(result.rows)
    st.dataframe(rows_as_records(rows), use_container_width=True, hide_index=True)

    best = max(rows, key=lambda r: r.value)
    st.success(f"Best: **{best.value:.1f} dB** at {best.axis1:g} MHz with {best.axis2} taps")
    render_downloads(result, "canceler")
