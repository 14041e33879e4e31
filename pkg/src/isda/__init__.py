"""Implicit semantic data augmentation (ISDA) on numpy."""
from ._accel import BACKEND
from .errors import (ConfigError, ContractViolation, DegenerateCovarianceError, DivergenceError, IsdaError,
                     ParseError)
from .loss import (ClassifierHead, IsdaConfig, LossResult, Schedule, adjusted_logits, cross_entropy_backward,
                   cross_entropy_forward, isda_loss_backward, isda_loss_forward, lambda_at)
from .stats import ClassStatistics, CovarianceEstimator, CovarianceMode

__version__ = "0.1.0"
