"""Dynamic proportional reversed hazards (DPRH) models for left-censored bivariate data."""
from .baselines import BaselineDistribution, FAMILIES, make_baseline
from .model import DprhParams

__all__ = ["BaselineDistribution", "DprhParams", "FAMILIES", "make_baseline"]
__version__ = "0.1.0"
