"""Rainbow Hamilton cycles in randomly colored random graphs."""

from .core import (
    ColoredGraph,
    ExposureLedger,
    HamiltonCycleCertificate,
    RandomSource,
    VerificationReport,
    derive_seed,
    parse_cgr,
    read_cgr,
    validate_colored_graph,
    verify_rainbow_hamilton,
    write_cgr,
)
from .params import ParamSet, derive_parameters, explicit_parameters, params_from_target
from .pipeline import PipelineOptions, TrialReport, find_rainbow_hamilton
from .sampler import LayeredSample, merge_to_colored_graph, sample_layered

__version__ = "0.1.0"

__all__ = [
    "ColoredGraph",
    "ExposureLedger",
    "HamiltonCycleCertificate",
    "LayeredSample",
    "ParamSet",
    "PipelineOptions",
    "RandomSource",
    "TrialReport",
    "VerificationReport",
    "derive_parameters",
    "derive_seed",
    "explicit_parameters",
    "find_rainbow_hamilton",
    "merge_to_colored_graph",
    "params_from_target",
    "parse_cgr",
    "read_cgr",
    "sample_layered",
    "validate_colored_graph",
    "verify_rainbow_hamilton",
    "write_cgr",
]
