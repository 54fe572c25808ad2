"""Stage-wise depth search for convolutional networks.

Public surface: architecture descriptors, the analytical cost model,
feature-importance scoring, the search loop, evaluators, and weight-transfer
planning.
"""

from .arch import (
    Architecture,
    ModuleKind,
    StageSpec,
    build_uniform,
    deepen,
    default_imagenet,
    default_low_resolution,
    deserialize,
    from_json_dict,
    load_descriptor,
    save_descriptor,
    serialize,
)
from .costs import (
    CellCostProfile,
    CostReport,
    EmissionsInput,
    cost_report,
    depth,
    emissions,
    flops,
    load_cell_profiles,
    memory,
    params,
)
from .errors import StagewiseError
from .evaluators import (
    BridgeEvaluator,
    DonorRef,
    EvalBudget,
    EvalResult,
    PlantedProfile,
    PlantedStage,
    SyntheticEvaluator,
    load_bundle,
    synthetic_evaluate,
    write_bundle,
)
from .importance import (
    FeatureMatrix,
    IlFsParams,
    InfFsParams,
    PlsParams,
    StageScores,
    StageSlice,
    ilfs_scores,
    inffs_scores,
    pls_fit,
    stage_scores,
    vip_scores,
)
from .search import (
    SearchConfig,
    SearchLedger,
    compare_stage_scores,
    default_growth_step,
    run_search,
)
from .transfer import TransferPlan, plan_transfer

__version__ = "0.1.0"

__all__ = [
    "Architecture",
    "BridgeEvaluator",
    "CellCostProfile",
    "CostReport",
    "DonorRef",
    "EmissionsInput",
    "EvalBudget",
    "EvalResult",
    "FeatureMatrix",
    "IlFsParams",
    "InfFsParams",
    "ModuleKind",
    "PlantedProfile",
    "PlantedStage",
    "PlsParams",
    "SearchConfig",
    "SearchLedger",
    "StageScores",
    "StageSlice",
    "StageSpec",
    "StagewiseError",
    "SyntheticEvaluator",
    "TransferPlan",
    "build_uniform",
    "compare_stage_scores",
    "cost_report",
    "deepen",
    "default_growth_step",
    "default_imagenet",
    "default_low_resolution",
    "depth",
    "deserialize",
    "emissions",
    "flops",
    "from_json_dict",
    "ilfs_scores",
    "inffs_scores",
    "load_bundle",
    "load_cell_profiles",
    "load_descriptor",
    "memory",
    "params",
    "plan_transfer",
    "pls_fit",
    "run_search",
    "save_descriptor",
    "serialize",
    "stage_scores",
    "synthetic_evaluate",
    "vip_scores",
    "write_bundle",
]
