"""Feature co-influence graphs, module detection, and module-level model
audits (stability, redundancy, bias exposure, synergy)."""

from .affinity import (
    AffinityMatrix,
    ExceedanceIndicators,
    SignedLayers,
    coexceedance,
    corr_signed,
    cosine_magnitude,
    exceedance,
    jaccard,
    mutual_info_binned,
    partial_corr,
    shrink,
    significance_filter,
    split_signed,
    tfidf_rescale,
)
from .communities import (
    ConsensusMatrix,
    Partition,
    conductance,
    consensus_partition,
    detect_modules,
    leiden_refine,
    louvain,
    mean_conductance,
    modularity,
)
from .config import PipelineConfig, canonical_text, config_hash, load_config, parse_config
from .errors import ConfigError, DataError, FormatError, MoiError, UsageError
from .graph import ExplanationGraph, add_backbone, connected_components, degree_normalize, sparsify, symmetrize
from .interventions import (
    InterventionPolicy,
    ablation_drop,
    emit_counterfactuals,
    ingest_predictions,
    intervene,
    synergy,
    synergy_null_calibration,
)
from .metrics import (
    AgreementScores,
    ModuleAttributions,
    bias_exposure,
    build_report,
    fairness_gaps,
    match_modules,
    module_attributions,
    partition_agreement,
    redundancy_index,
)
from .models import RidgeModel, TreeEnsemble, fit_ridge, fit_tree_ensemble, load_model, save_model
from .pipeline import run_pipeline
from .stability import MsiResult, PerturbationScheme, StabilityReport, msi, stability_sweep
from .store import (
    AttributionMatrix,
    CohortSelector,
    LabelTable,
    SampleWeights,
    WorkingMatrix,
    check_additivity,
    load_attributions,
    make_working_matrix,
    save_attributions,
    slice_cohort,
)
from .synthetic import (
    SyntheticDataset,
    SyntheticSpec,
    exhaustive_shap,
    exhaustive_shap_matrix,
    gen_additive,
    gen_cross_module,
    gen_environments,
    gen_xor,
    generate,
    linear_shap,
)

__version__ = "0.1.0"
