"""finslerlab: Finsler tensors from a metric DSL, special-class checks and
semi-concurrent vector fields."""
from .catalog import builtin, names, verify_example
from .classify import classify_metric, classify_point
from .connections import (
    CallableField, ExprField, MetricField, connection_bundle, h_cov_deriv, t_tensor, v_cov_deriv,
)
from .dsl import Bindings, MetricSpec, metric_source, parse_domain, parse_expr, parse_metric
from .errors import (
    DegenerateMetric, DimensionMismatch, DomainViolation, DSLSyntaxError, FinslerLabError,
    IncompatibleKind, NonFiniteResult, NoSamplesError, UnknownIdentifier,
)
from .scfield import VectorFieldSpec, check_condition, sc_detect, sc_nullspace_at
from .symdiff import differentiate
from .tape import BACKEND, compile_tape
from .tensors import Tensor, domain_probe, fundamental_bundle

__version__ = "0.1.0"

__all__ = [
    "BACKEND", "Bindings", "CallableField", "DSLSyntaxError", "DegenerateMetric",
    "DimensionMismatch", "DomainViolation", "ExprField", "FinslerLabError", "IncompatibleKind",
    "MetricField", "MetricSpec", "NoSamplesError", "NonFiniteResult", "Tensor",
    "UnknownIdentifier", "VectorFieldSpec", "builtin", "check_condition", "classify_metric",
    "classify_point", "compile_tape", "connection_bundle", "differentiate", "domain_probe",
    "fundamental_bundle", "h_cov_deriv", "metric_source", "names", "parse_domain", "parse_expr",
    "parse_metric", "sc_detect", "sc_nullspace_at", "t_tensor", "v_cov_deriv", "verify_example",
    "__version__",
]
