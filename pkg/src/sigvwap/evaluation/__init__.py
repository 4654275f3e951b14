from sigvwap.evaluation.economics import (
    as_curve,
    exec_price,
    improvement_vs_baseline,
    market_vwap,
    oracle_allocation,
    slippage_bound,
    vwap_losses,
    window_losses,
)
from sigvwap.evaluation.report import (
    LOSS_COLUMNS,
    ReportTables,
    format_table,
    loss_frame,
    read_losses,
    render_text,
    report_tables,
    write_losses,
    write_report,
)

__all__ = [
    "LOSS_COLUMNS",
    "ReportTables",
    "as_curve",
    "exec_price",
    "format_table",
    "improvement_vs_baseline",
    "loss_frame",
    "market_vwap",
    "oracle_allocation",
    "read_losses",
    "render_text",
    "report_tables",
    "slippage_bound",
    "vwap_losses",
    "window_losses",
    "write_losses",
    "write_report",
]
