"""Multiple testing for multivariate group-mean comparisons.

Thin wrapper around the C++ core: maxT-type procedures with a
spurious-correlation step-down variant, plus a simulation entry point.
"""

try:
    from ._spurcor import (  # type: ignore[attr-defined]
        Dataset,
        Hypothesis,
        Method,
        NumericError,
        ParseError,
        SchemaError,
        Sidedness,
        TestOutcome,
        ValidationError,
        analyze,
        correlation_matrix,
        cov_global_pooled,
        cov_tilde,
        critical_value,
        load_csv,
        simulate,
        t_statistics,
    )
except ImportError:  # pragma: no cover - build-tree layout
    from _spurcor import (  # type: ignore[no-redef]
        Dataset,
        Hypothesis,
        Method,
        NumericError,
        ParseError,
        SchemaError,
        Sidedness,
        TestOutcome,
        ValidationError,
        analyze,
        correlation_matrix,
        cov_global_pooled,
        cov_tilde,
        critical_value,
        load_csv,
        simulate,
        t_statistics,
    )

__all__ = [
    "Dataset",
    "Hypothesis",
    "Method",
    "NumericError",
    "ParseError",
    "SchemaError",
    "Sidedness",
    "TestOutcome",
    "ValidationError",
    "analyze",
    "correlation_matrix",
    "cov_global_pooled",
    "cov_tilde",
    "critical_value",
    "load_csv",
    "simulate",
    "t_statistics",
]

__version__ = "0.1.0"
