"""
IBFD IAB Link Simulator
2-Tab Workflow: Analog Canceler → Spectral Efficiency
"""

import streamlit as st

from src.config import load_config

# Page config
st.set_page_config(
    page_title="IBFD IAB Link Simulator",
    page_icon="📡",
    layout="wide",
    initial_sidebar_state="collapsed"
)


# Initialize session state
def init_session_state():
    """Initialize all session state variables"""
    cfg = load_config()
    defaults = {
        "seed": cfg.seed,
        "trials": cfg.trials,
        "desk_scale": True,

        "canceler_result": None,   # ExperimentResult of the last canceler sweep
        "se_result": None,         # ExperimentResult of the last SE sweep
    }

    for key, default in defaults.items():
        if key not in st.session_state:
            st.session_state[key] = default


init_session_state()

# App header
st.title("📡 IBFD IAB Link Simulator")
st.caption("FR2 in-band full-duplex integrated access and backhaul, link level")

tab1, tab2 = st.tabs([
    "📡 Analog canceler",
    "📶 Spectral efficiency"
])

# ============================================================
# TAB 1: ANALOG CANCELER
# ============================================================
with tab1:
    from src.canceler_tab import render_canceler_tab
    render_canceler_tab()

# ============================================================
# TAB 2: SPECTRAL EFFICIENCY
# ============================================================
with tab2:
    from src.se_tab import render_se_tab
    render_se_tab()
