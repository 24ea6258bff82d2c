"""Simulation laboratory for online class-incremental learning on
realistic, repetition-heavy data streams.

Pipeline: a probabilistic scenario generator schedules which classes appear
in each task and with how many samples; a single-pass stream feeds a
compact online classifier trained with experience replay; a dual-virtual-
model gate decides per batch whether to train on the full batch or only on
its never-seen-before classes; per-task accuracy matrices summarize runs.
"""

from .buffer import ExemplarBuffer
from .dataset import SampleStore, make_gaussian_store, split_store
from .gating import GateState
from .harness import RunConfig, RunResult, run_experiment, run_suite
from .learner import ClassifierState, SgdConfig, init_classifier
from .metrics import AccuracyMatrix, average_accuracy
from .scenario import Scenario, ScenarioConfig, build_scenario, validate_scenario
from .stream import LabeledVector, TaskStream, materialize_stream

__all__ = [
    "AccuracyMatrix",
    "ClassifierState",
    "ExemplarBuffer",
    "GateState",
    "LabeledVector",
    "RunConfig",
    "RunResult",
    "SampleStore",
    "Scenario",
    "ScenarioConfig",
    "SgdConfig",
    "TaskStream",
    "average_accuracy",
    "build_scenario",
    "init_classifier",
    "make_gaussian_store",
    "materialize_stream",
    "run_experiment",
    "run_suite",
    "split_store",
    "validate_scenario",
]

__version__ = "0.1.0"
