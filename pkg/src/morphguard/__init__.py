"""Morphing-attack vulnerability analysis for face recognition latent spaces."""

from ._backend import backend_name
from .embeddings import (
    Dataset,
    SampleRecord,
    angle,
    average_embedding,
    load_dataset,
    normalize,
    save_dataset,
)
from .metrics import (
    EvaluationSummary,
    ScoreOptions,
    ScoreRecord,
    ScoreSet,
    apcer,
    bpcer,
    compute_scores,
    det_sweep,
    evaluate_three_way,
    fmr,
    fnmr,
    load_scores,
    map_rc,
    mmpmr,
    save_scores,
    summarize,
    three_way_classify,
    threshold_at_apcer,
    threshold_at_fmr,
    threshold_wc,
    wcmmpmr,
)
from .morphing import (
    AttackRecord,
    IdentityPair,
    generate_wc_attacks,
    interpolated_morph,
    select_pairs,
    worst_case_embedding,
)
from .simulator import (
    IdentityCluster,
    SimulationParams,
    sample_kappa,
    sample_uniform_direction,
    sample_vmf,
    simulate,
    simulate_population,
)

__version__ = "0.1.0"

__all__ = [
    "AttackRecord",
    "Dataset",
    "EvaluationSummary",
    "IdentityCluster",
    "IdentityPair",
    "SampleRecord",
    "ScoreOptions",
    "ScoreRecord",
    "ScoreSet",
    "SimulationParams",
    "angle",
    "apcer",
    "average_embedding",
    "backend_name",
    "bpcer",
    "compute_scores",
    "det_sweep",
    "evaluate_three_way",
    "fmr",
    "fnmr",
    "generate_wc_attacks",
    "interpolated_morph",
    "load_dataset",
    "load_scores",
    "map_rc",
    "mmpmr",
    "normalize",
    "sample_kappa",
    "sample_uniform_direction",
    "sample_vmf",
    "save_dataset",
    "save_scores",
    "select_pairs",
    "simulate",
    "simulate_population",
    "summarize",
    "three_way_classify",
    "threshold_at_apcer",
    "threshold_at_fmr",
    "threshold_wc",
    "wcmmpmr",
    "worst_case_embedding",
]
