from .evaluate_workflow import ClassifyWorkflow, EvaluateWorkflow
from .fuse_workflow import FuseWorkflow
from .gradcheck_workflow import GradCheckWorkflow
from .reproduce_workflow import ReproduceWorkflow
from .simulate_workflow import SimulateWorkflow
from .train_workflow import TrainWorkflow

__all__ = [
    "SimulateWorkflow",
    "FuseWorkflow",
    "TrainWorkflow",
    "ClassifyWorkflow",
    "EvaluateWorkflow",
    "ReproduceWorkflow",
    "GradCheckWorkflow",
]
