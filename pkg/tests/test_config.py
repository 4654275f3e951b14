from sigvwap.types import VARIANTS

# Small enough to train in seconds with the numpy engine.
TEST_OVERRIDES = {
    "lookback": 4,
    "signature_lookback": 6,
    "horizon": 3,
    "d_model": 6,
    "num_heads": 2,
    "embedding": 2,
    "stack_depth": 1,
    "num_sublayers": 1,
    "kan_width": 3,
    "grid_intervals": 4,
    "adjuster_hidden": (4,),
    "batch_size": 8,
    "epochs": 2,
    "lr": 1e-2,
    "window_bars": 8,
    "stride": 4,
    "eval_stride": 2,
    "synthetic_bars": 160,
    "seeds": (0,),
}

SYNTHETIC_ASSETS = ("AAA", "BBB")
SYNTHETIC_SEED = 7

# 2 samples, model_abs [0.001, 0.003] vs naive_abs [0.002, 0.006]
GOLDEN_LOSSES = [
    # (anchor, model_signed, naive_signed)
    (10, 0.001, -0.002),
    (11, -0.003, 0.006),
]
GOLDEN_POOLED_CSV = (
    "variant,subset,seeds,assets,samples,model_abs_bp,naive_abs_bp,improvement_abs_pct,"
    "model_quad_millionths,naive_quad_millionths,improvement_quad_pct,"
    "asset_improvement_abs_pct,asset_improvement_quad_pct\n"
    "GFT-Sig,test,1,1,2,20.00,40.00,+50.00,5.00,20.00,+75.00,+50.00,+75.00\n"
)

ALL_VARIANTS = VARIANTS
