#!/usr/bin/env python3
"""
Streamlit UI for fts-sentinel experiments
"""

from dataclasses import replace
from pathlib import Path
import time
import traceback

import streamlit as st

from config import PREVIEW_ROWS, UI_MAX_REPLICATIONS
from data_loaders import load_experiment_config
from harness import EXPERIMENTS, ExperimentConfig, report_stem, run_experiment
from utils import ConfigError, NumericError, safe_filename

_UI_DIR = Path(__file__).resolve().parent
_INPUT_DIR = _UI_DIR / "input"

# Startup timing (logged to stdout for Streamlit Cloud logs)
_UI_T0 = time.perf_counter()
def _ui_log(msg: str) -> None:
    print(f"[ui] +{time.perf_counter() - _UI_T0:.3f}s {msg}", flush=True)

_ui_log("ui.py start")

st.set_page_config(
    page_title="fts-sentinel",
    page_icon="📈",
    layout="centered"
)

st.markdown(
    """
<style>
  button, input, textarea, select {
    border-radius: 10px !important;
  }
  .main .block-container {
    max-width: 980px;
    padding-top: 1rem;
    padding-bottom: 2.5rem;
  }
</style>
""",
    unsafe_allow_html=True,
)
_ui_log("rendered CSS/theme")

st.markdown(
    """
<div style="margin-top: 0.25rem; margin-bottom: 0.25rem;">
  <div style="font-size: 1.8rem; font-weight: 750; line-height: 1.15;">
    fts-sentinel
  </div>
  <div style="font-size: 1.05rem; opacity: 0.8; margin-top: 0.2rem;">
    Monte Carlo studies for open-ended monitoring of sparse functional time series
  </div>
</div>
""",
    unsafe_allow_html=True,
)

with st.sidebar:
    with st.expander("About", expanded=False):
        st.markdown("**fts-sentinel**")
        st.markdown("Runs the size, power, decay and threshold experiments of the command line tool.")
        st.markdown("Larger studies belong on the command line: `./fts-sentinel experiment --config ...`")
_ui_log("rendered sidebar")

if "report" not in st.session_state:
    st.session_state.report = None
if "_last_error" not in st.session_state:
    st.session_state._last_error = None


def _preset_configs():
    """Example configs shipped in input/, keyed by file name."""
    if not _INPUT_DIR.is_dir():
        return {}
    return {p.name: p for p in sorted(_INPUT_DIR.glob("*.json"))}


st.subheader("Experiment")
presets = _preset_configs()
choice = st.selectbox(
    "Start from",
    options=["(defaults)"] + list(presets),
    help="Example configs from the input/ folder.",
)

base = None
try:
    base = load_experiment_config(presets[choice]) if choice in presets else ExperimentConfig()
except (ValueError, OSError) as e:
    st.error(f"Could not load {choice}: {e}")
    base = ExperimentConfig()

with st.form("experiment_form", clear_on_submit=False):
    c1, c2 = st.columns([1, 1])
    with c1:
        experiment = st.selectbox("Experiment", options=list(EXPERIMENTS), index=list(EXPERIMENTS).index(base.experiment))
        N = st.number_input("Training length N", min_value=2, max_value=5000, value=int(base.N), step=10)
        alpha = st.number_input("Level alpha", min_value=0.001, max_value=0.5, value=float(base.alpha), step=0.01, format="%.3f")
    with c2:
        n_rep = st.number_input(
            "Replications",
            min_value=1,
            max_value=UI_MAX_REPLICATIONS,
            value=int(min(base.n_rep, UI_MAX_REPLICATIONS)),
            help=f"Capped at {UI_MAX_REPLICATIONS} in the browser.",
        )
        seed = st.number_input("Master seed", min_value=0, value=int(base.master_seed), step=1)
        calibration = st.radio("Calibration", options=["estimated", "oracle"],
                               index=0 if base.calibration == "estimated" else 1, horizontal=True)
    run = st.form_submit_button("Run experiment")

if run:
    st.session_state._last_error = None
    st.session_state.report = None
    try:
        cfg = replace(
            base,
            experiment=experiment,
            N=int(N),
            alpha=float(alpha),
            n_rep=int(n_rep),
            master_seed=int(seed),
            calibration=calibration,
        )
        if cfg.experiment == "decay" and not cfg.N_list:
            raise ConfigError("The decay experiment needs an N_list; start from a decay config in input/")
        _t0 = time.perf_counter()
        _ui_log(f"{cfg.experiment} run start (N={cfg.N}, n_rep={cfg.n_rep})")
        with st.spinner(f"Running the {cfg.experiment} experiment…"):
            st.session_state.report = run_experiment(cfg)
        _ui_log(f"{cfg.experiment} run done in {time.perf_counter() - _t0:.2f}s")
    except ConfigError as e:
        st.error(f"Invalid configuration: {e}")
    except NumericError as e:
        st.session_state._last_error = traceback.format_exc()
        st.error(f"Numerical failure: {e}")
    except (ValueError, OSError) as e:
        st.session_state._last_error = traceback.format_exc()
        st.error(f"Experiment failed: {e}")

if st.session_state._last_error:
    with st.expander("Show error details", expanded=False):
        st.code(st.session_state._last_error)

report = st.session_state.report
if report is not None:
    st.markdown("---")
    st.subheader("Summary")
    st.caption(f"{report.config.experiment} · seed {report.config.master_seed} · {report.wall_time:.2f}s")
    st.json(report.summary)

    df = report.frame()
    st.subheader("Rows")
    if len(df) > PREVIEW_ROWS:
        st.caption(f"Showing the first {PREVIEW_ROWS} of {len(df)} rows.")
    st.dataframe(df.head(PREVIEW_ROWS), use_container_width=True, hide_index=True)

    st.download_button(
        "Download CSV",
        data=df.to_csv(index=False).encode("utf-8"),
        file_name=safe_filename(report_stem(report)),
        mime="text/csv",
    )
_ui_log("render complete")
