"""
Summaries and figures over sweep tables.
"""

import logging
from io import StringIO

import pandas as pd
import plotly.express as px
import plotly.graph_objects as go

from src.services.simulation import CSV_COLUMNS

logger = logging.getLogger(__name__)


def load_sweep_csv(text: str) -> pd.DataFrame:
    table = pd.read_csv(StringIO(text))
    missing = [c for c in CSV_COLUMNS if c not in table.columns]
    if missing:
        raise ValueError(f"sweep table lacks columns {', '.join(missing)}")
    return table[CSV_COLUMNS]


def utilization_summary(table: pd.DataFrame) -> pd.DataFrame:
    """Mean utilization per (thread, strategy) and maxlen, seeds averaged."""
    if table.empty:
        return pd.DataFrame()
    return table.pivot_table(
        index=["thread", "strategy"], columns="maxlen", values="utilization", aggfunc="mean"
    ).round(6)


def discard_summary(table: pd.DataFrame) -> pd.DataFrame:
    """Discarded speculative messages as a share of sent messages."""
    if table.empty:
        return pd.DataFrame()
    grouped = table.groupby(["thread", "strategy", "maxlen"], as_index=False)[["msgs", "discarded"]].sum()
    grouped["discard_ratio"] = (grouped["discarded"] / grouped["msgs"].where(grouped["msgs"] > 0)).fillna(0.0)
    return grouped


def utilization_figure(table: pd.DataFrame) -> go.Figure:
    """Utilization against run-ahead depth, one line per thread and strategy."""
    if table.empty:
        return go.Figure()
    means = table.groupby(["thread", "strategy", "maxlen"], as_index=False)["utilization"].mean()
    means["series"] = means["thread"] + " / " + means["strategy"]
    fig = px.line(
        means,
        x="maxlen",
        y="utilization",
        color="series",
        markers=True,
        title="Execution unit utilization by run-ahead depth",
    )
    fig.update_yaxes(range=[0, 1])
    fig.update_xaxes(dtick=1)
    return fig
