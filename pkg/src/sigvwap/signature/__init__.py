from sigvwap.signature.tensor_algebra import (
    chen_product,
    signature_coefficients,
    truncated_signature,
    zero_signature,
)
from sigvwap.signature.features import (
    SignatureFeatures,
    SignatureNorm,
    SignatureScaler,
    normalize_signature,
    repeat_context,
    scale_path,
)

__all__ = [
    "SignatureFeatures",
    "SignatureNorm",
    "SignatureScaler",
    "chen_product",
    "normalize_signature",
    "repeat_context",
    "scale_path",
    "signature_coefficients",
    "truncated_signature",
    "zero_signature",
]
