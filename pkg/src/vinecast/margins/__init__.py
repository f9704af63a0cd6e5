"""Univariate margin models and the SGED innovation distribution."""

from .models import (
    U_CLIP,
    ArfimaFit,
    FittedMargin,
    GarchFit,
    HarFit,
    MarginSpec,
    MeanFit,
    arfima_fit,
    arfima_forecast,
    arfima_residuals,
    extract_residuals,
    fit_margin,
    frac_diff,
    garch_fit,
    har_fit,
    har_forecast,
    innovation_scale,
    mean_fit,
    mean_forecast,
    pit,
    pit_inverse,
    point_forecast,
)
from .sged import (
    SgedParams,
    sged_cdf,
    sged_pdf,
    sged_quantile,
    sged_sample,
    standardized_params,
)

__all__ = [
    "U_CLIP",
    "ArfimaFit",
    "FittedMargin",
    "GarchFit",
    "HarFit",
    "MarginSpec",
    "MeanFit",
    "SgedParams",
    "arfima_fit",
    "arfima_forecast",
    "arfima_residuals",
    "extract_residuals",
    "fit_margin",
    "frac_diff",
    "garch_fit",
    "har_fit",
    "har_forecast",
    "innovation_scale",
    "mean_fit",
    "mean_forecast",
    "pit",
    "pit_inverse",
    "point_forecast",
    "sged_cdf",
    "sged_pdf",
    "sged_quantile",
    "sged_sample",
    "standardized_params",
]
