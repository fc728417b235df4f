"""tfcw: non-parametric point cloud analysis.

Point clouds are encoded into compact dimension-pairwise-distance matrices
via pluggable surface descriptors; classification and segmentation run
against a similarity memory bank; a robustness harness covers rotations,
corruptions, batching stability, and volume scaling.
"""

from .bank import (
    MemoryBank,
    Metrics,
    build_bank,
    compute_metrics,
    load_bank,
    predict,
    predict_pointwise,
    save_bank,
    sweep_gamma,
)
from .datasets import Dataset, load_off, load_points_bin, save_points_bin
from .descriptors import (
    DescriptorField,
    estimate_normals,
    pcsd_geo,
    pcsd_risp,
    pcsd_xyz,
)
from .errors import InvalidArgument, InvalidInput, ParseError, TfcwError
from .geometry import (
    NeighborIndex,
    PointCloud,
    apply_rotation,
    farthest_point_sample,
    knn,
    random_rotation,
)
from .graph import (
    empowered_block,
    gram_form,
    gram_variant,
    hybrid_pool,
    pairwise_dim_distance,
    tfcw_empowered,
    tfcw_global,
    united_block,
)
from .pipeline import (
    PipelineConfig,
    StageOutput,
    decode_segmentation,
    encode_classification,
    encode_segmentation,
    propagate_features,
    unit_sphere_normalized,
)
from .robustness import (
    CorruptionSpec,
    ScalingReport,
    apply_global_noise,
    apply_jitter,
    rotation_scenario,
    shuffle_stability_check,
    volume_scaling_run,
)
from .runner import RunResult, emit_results, run_ablation, run_classify, run_segment

__version__ = "0.1.0"
