from typing import Literal

AssetId = str
Seconds = int

Variant = Literal["AFD", "GFD", "GFT", "GFT-Sig"]
Backbone = Literal["recurrent", "transformer"]
Scope = Literal["per-asset", "global"]
Mode = Literal["train", "infer"]
Profile = Literal["tiny", "full"]
Subset = Literal["train", "validation", "test", "holdout"]
EvalMode = Literal["model", "naive", "oracle"]

VARIANTS = ("AFD", "GFD", "GFT", "GFT-Sig")
