"""Semantic embedding, retrieval, and mining of STL formulae."""

try:
    from ._stlmine import (
        ReferenceSet,
        SemanticDb,
        build_db,
        build_reference_set,
        canonical,
        classify,
        embed,
        gen_linear,
        kernel,
        load_db,
        load_reference_set,
        mine,
        node_count,
        objective_g,
        query,
        robustness,
        sample_mu0,
        satisfies,
        save_db,
        save_reference_set,
        train_ivf,
    )
except ImportError:
    from _stlmine import (
        ReferenceSet,
        SemanticDb,
        build_db,
        build_reference_set,
        canonical,
        classify,
        embed,
        gen_linear,
        kernel,
        load_db,
        load_reference_set,
        mine,
        node_count,
        objective_g,
        query,
        robustness,
        sample_mu0,
        satisfies,
        save_db,
        save_reference_set,
        train_ivf,
    )

__all__ = [
    "ReferenceSet",
    "SemanticDb",
    "build_db",
    "build_reference_set",
    "canonical",
    "classify",
    "embed",
    "gen_linear",
    "kernel",
    "load_db",
    "load_reference_set",
    "mine",
    "node_count",
    "objective_g",
    "query",
    "robustness",
    "sample_mu0",
    "satisfies",
    "save_db",
    "save_reference_set",
    "train_ivf",
]
