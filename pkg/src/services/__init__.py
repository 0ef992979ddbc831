from .dataset_service import DatasetService
from .evaluation_service import EvaluationService
from .kalman_service import KinematicKalmanFilter
from .gendamp_service import ConvolutionIntegrator

__all__ = [
    "DatasetService",
    "EvaluationService",
    "KinematicKalmanFilter",
    "ConvolutionIntegrator",
]
