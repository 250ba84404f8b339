"""Dual-stage two-phase attention recurrent forecasters (DSTP-RNN, DSTP-RNN-II, DeepAttn) and baselines."""
from .data import DatasetSpec, StandardizationStats, Table, WindowSet, load, make_windows, synthesize
from .data import split_and_standardize
from .evaluation import ExperimentGrid, ForecastReport, evaluate, export_attention, mae, rmse, run_grid
from .models import ARCHITECTURES, ModelConfig, forward, init_params, parameter_count
from .training import Checkpoint, TrainConfig, load_checkpoint, save_checkpoint, train

__all__ = [
    "ARCHITECTURES", "Checkpoint", "DatasetSpec", "ExperimentGrid", "ForecastReport", "ModelConfig",
    "StandardizationStats", "Table", "TrainConfig", "WindowSet", "evaluate", "export_attention",
    "forward", "init_params", "load", "load_checkpoint", "mae", "make_windows", "parameter_count",
    "rmse", "run_grid", "save_checkpoint", "split_and_standardize", "synthesize", "train",
]
