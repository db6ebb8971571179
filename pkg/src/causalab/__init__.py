"""Causal-inference workbench: DAG modeling with variable-type
classification, cohort balance and positivity diagnostics, matching, effect
exploration, and analysis provenance, exposed as a library, CLI, and HTTP
service."""

from .balance import (
    ASMD_THRESHOLD,
    BalanceReport,
    BalanceRow,
    CovariateDetail,
    balance_report,
    details_view,
    smd,
    sort_report,
)
from .dag import (
    CausalDag,
    ClassificationResult,
    NodeClass,
    add_edge,
    classify,
    export_dag_json,
    import_dag_json,
    import_node_link,
    set_outcome,
    set_treatment,
)
from .dataset import (
    Column,
    ColumnKind,
    Dataset,
    binarize_at,
    drop_missing,
    load_csv,
    numeric_matrix,
    one_hot,
)
from .effects import (
    EffectRecord,
    SubgroupSpec,
    SubgroupTable,
    ate_ipw,
    ate_matched,
    default_threshold,
    facet,
    pair_effects,
)
from .matching import (
    MatchOrder,
    MatchResult,
    MatchSpec,
    Metric,
    default_logit_caliper,
    match,
    matched_cohort,
)
from .propensity import (
    PropensityModel,
    WeightVector,
    fit_propensity,
    ipw_weights,
    predict,
    propensity_histogram,
    select_by_score,
)
from .provenance import (
    VersionTree,
    add_version,
    ate_series,
    icicle_data,
    load_versions,
    save_versions,
)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
