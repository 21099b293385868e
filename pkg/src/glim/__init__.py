"""Learned influence estimation and seed selection under the Independent Cascade model."""

__version__ = "0.1.0"

from .errors import (ConfigError, DomainError, GlimError, ModelError, ParseError, SchemaError,
                     SizeError, TrainingError, ValidationError, VersionError)
from .graph import (DirectedGraph, GeneratorConfig, from_edges, generate, load_edge_list,
                    load_graph, save_graph, uniform_ic)
from .simulate import SpreadEstimate, exact_spread, simulate_ic, upper_bound_spread
from .glie import (GlieConfig, GlieEstimator, GlieModel, InfluenceSets, encode_seeds,
                   extract_influence_sets, forward, load_model, save_model, train)
from .maximize import (MaximizeResult, celf, celf_glie, celf_mc, degree_discount,
                       filter_candidates, k_core, pun)
from .grim import GrimConfig, QNet, grim_select, grim_train, load_qnet, save_qnet
from .dataset import Dataset, TrainingSample, build_dataset, protocol_configs
from .evaluation import ExperimentReport, check_monotone_submodular, mae_relative, run_experiment
