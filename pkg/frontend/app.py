import logging
import sys
from pathlib import Path

import streamlit as st

# Add the project root to the Python path
sys.path.insert(0, str(Path(__file__).parent.parent))

from src.config import DATABASE_URL, LOG_LEVEL
from src.services.results_recorder import ResultsRecorder
from src.services.sweep_report import (
    discard_summary,
    load_sweep_csv,
    utilization_figure,
    utilization_summary,
)

logging.basicConfig(level=LOG_LEVEL)

st.set_page_config(
    page_title="Instruction Stream Lab",
    page_icon="📈",
    layout="wide"
)

st.title("📈 Instruction Stream Lab")

st.markdown("""
Execution unit utilization of the run-ahead instruction stream protocol.
Load a sweep CSV written by `simulate --csv`, or the rows recorded with `--record`.
""")

source = st.sidebar.radio("Source", ["Upload CSV", "Results database"])

table = None
if source == "Upload CSV":
    upload = st.sidebar.file_uploader("Sweep CSV", type="csv")
    if upload is not None:
        try:
            table = load_sweep_csv(upload.getvalue().decode("utf-8"))
        except ValueError as e:
            st.error(str(e))
else:
    st.sidebar.caption(DATABASE_URL)
    recorder = ResultsRecorder(DATABASE_URL)
    table = recorder.load_sweeps()
    checks = recorder.load_checks()
    if not checks.empty:
        with st.expander("🔍 Recorded equivalence checks"):
            st.dataframe(checks.sort_values("equivalent", kind="stable"), use_container_width=True)

if table is None or table.empty:
    st.info("No sweep rows to show yet.")
    st.stop()

threads = sorted(table["thread"].unique())
chosen = st.sidebar.multiselect("Threads", threads, default=threads)
table = table[table["thread"].isin(chosen)]

st.plotly_chart(utilization_figure(table), use_container_width=True)

col1, col2 = st.columns(2)

with col1:
    st.markdown("#### Utilization by maxlen")
    st.dataframe(utilization_summary(table), use_container_width=True)

with col2:
    st.markdown("#### Discarded speculation")
    st.dataframe(discard_summary(table), use_container_width=True)

with st.expander("Raw rows"):
    st.dataframe(table, use_container_width=True)
    st.download_button(
        label="📥 Download CSV",
        data=table.to_csv(index=False),
        file_name="sweep.csv",
        mime="text/csv",
    )
