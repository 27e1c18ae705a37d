"""lalec: compile pipelines with schema-described hyperparameters into
optimizer-ready search spaces, and search them with built-in strategies."""

from . import toyml  # noqa: F401  (registers the toy implementations)
from .operator_graph import (
    Individual,
    LifecycleState,
    Operator,
    auto_configure,
    both,
    choose,
    configure,
    customize_schema,
    fit,
    freeze_trainable,
    freeze_trained,
    pipe,
    predict,
    state_of,
)
from .pipeline_dsl import parse_expr, parse_grammar, pretty_print
from .schema_model import default_config, parse_schema, validate
from .space_backends import compile_space
from .space_normalizer import drop_constraints, member, normalize

__all__ = [
    "Individual",
    "LifecycleState",
    "Operator",
    "auto_configure",
    "both",
    "choose",
    "compile_space",
    "configure",
    "customize_schema",
    "default_config",
    "drop_constraints",
    "fit",
    "freeze_trainable",
    "freeze_trained",
    "member",
    "normalize",
    "parse_expr",
    "parse_grammar",
    "parse_schema",
    "pipe",
    "predict",
    "pretty_print",
    "state_of",
    "toyml",
    "validate",
]
