"""Virtual flow metering laboratory.

A synthetic multiphase choke-flow process, five regression model
architectures spanning mechanistic to fully data-driven, MAP training
with early stopping, and a seeded benchmark harness with quantile
aggregation. See the README for the experiment catalogue and the
command-line interface.
"""

from vfmlab.choke import (ChokeConditions, ChokeParams, FluidSpec,
                          PhaseFractions, sachdeva_mass_flow)
from vfmlab.datasets import (Dataset, generate_d2, generate_d3, load_dataset,
                             sample_d1, save_dataset)
from vfmlab.experiments import (ExperimentConfig, ExperimentResult,
                                default_config, mae, quantiles, run_exp1,
                                run_exp2, run_exp3, run_exp4, run_experiment,
                                save_results, TOOL_VERSION)
from vfmlab.models import (Model, ModelKind, build, load_checkpoint,
                           save_checkpoint)
from vfmlab.nnet import NetSpec
from vfmlab.process import calibrate_flow_scale, evaluate_process
from vfmlab.training import TrainConfig, TrainReport, TrainingDiverged, train

__version__ = TOOL_VERSION

__all__ = [
    "ChokeConditions",
    "ChokeParams",
    "Dataset",
    "ExperimentConfig",
    "ExperimentResult",
    "FluidSpec",
    "Model",
    "ModelKind",
    "NetSpec",
    "PhaseFractions",
    "TrainConfig",
    "TrainReport",
    "TrainingDiverged",
    "__version__",
    "build",
    "calibrate_flow_scale",
    "default_config",
    "evaluate_process",
    "generate_d2",
    "generate_d3",
    "load_dataset",
    "load_checkpoint",
    "mae",
    "quantiles",
    "run_exp1",
    "run_exp2",
    "run_exp3",
    "run_exp4",
    "run_experiment",
    "sachdeva_mass_flow",
    "sample_d1",
    "save_checkpoint",
    "save_dataset",
    "save_results",
    "train",
]
