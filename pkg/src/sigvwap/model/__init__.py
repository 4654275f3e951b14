from sigvwap.model.record import Record

from sigvwap.model.market import (
    AssetSeries,
    GapReport,
    MarketBar,
    NormalizedSeries,
    SampleWindow,
    SplitRanges,
    SplitSpec,
)
from sigvwap.model.signature_vector import SignatureVector, signature_dim
from sigvwap.model.allocation import AllocationCurve
from sigvwap.model.execution import (
    ExecutionRecord,
    LossReport,
    SlippageDecomposition,
)


__all__ = [
    "Record",
    "AssetSeries",
    "GapReport",
    "MarketBar",
    "NormalizedSeries",
    "SampleWindow",
    "SplitRanges",
    "SplitSpec",
    "SignatureVector",
    "signature_dim",
    "AllocationCurve",
    "ExecutionRecord",
    "LossReport",
    "SlippageDecomposition",
]
