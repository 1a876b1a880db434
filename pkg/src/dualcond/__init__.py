from .model import (
    DualState,
    dual_condition,
    elbo,
    fit,
    natgrad_step,
    predict,
    predict_y,
    to_moments,
)

__all__ = [
    "DualState",
    "dual_condition",
    "elbo",
    "fit",
    "natgrad_step",
    "predict",
    "predict_y",
    "to_moments",
]
