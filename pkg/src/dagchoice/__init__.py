"""Subset-choice models estimated as path choice on directed acyclic graphs."""

from .baselines import MCBase, SCBase, SampledChoiceSet, build_sampled_choice_set, mc_base_probability, sc_base_probability
from .core import Bounds, Item, ItemUniverse, Observation, ParameterVector, item_utilities, subset_utility
from .dag import ChoiceDag, NodeId, PathInDag, build_dag, build_dags
from .data import Dataset, SyntheticSpec, generate_synthetic, load_items, load_observations, split
from .errors import ConfigurationError, DagChoiceError, DataError, GuardError, MappingError, ModelError
from .estimation import EstimationReport, FitOptions, ModelSpec, fit, predict_loglik, standard_errors
from .nested import NestedRecursiveLogit, ScaleSpec, solve_nested_value
from .oracle import enumerate_count_lmdc, enumerate_lmdc
from .recursive_logit import RecursiveLogit, ValueTable, sample_paths, solve_value

__version__ = "0.1.0"
