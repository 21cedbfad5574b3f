"""Recovering scene geometry from 3D line clouds.

A line cloud replaces every point of a scene with a random line through
it. This package lifts point clouds to line clouds, estimates the hidden
points back from nothing but the lines (nearest-neighbor candidate sets
plus a recursive uniformity test on the candidate spread), and measures
how well the estimates match the original scene.
"""

from .errors import (
    ConfigError,
    DegenerateWindow,
    EmptyInput,
    InvalidSamples,
    InvalidSpec,
    KTooLarge,
    LineCloudError,
    MisalignedInputs,
    NoCandidates,
    ParallelLines,
    ParseError,
    TooFewCandidates,
    TooFewValidEstimates,
    UnsupportedFormat,
    ZeroSurvivors,
)
from .evaluate import (
    ErrorReport,
    MonteCarloReport,
    error_report,
    montecarlo_two_point,
    remove_statistical_outliers,
    sparsity_sweep,
    write_cdf_csv,
    write_mc_cdf_csv,
    write_sweep_csv,
)
from .geometry import (
    ClosestPair,
    Line3,
    closest_points,
    line_line_distance,
    point_line_distance,
    point_point_distance,
    sample_uniform_direction,
    sample_uniform_directions,
)
from .linecloud import (
    LineCloud,
    PointCloud,
    SceneSpec,
    lift,
    read_lines,
    read_ply,
    reanchor,
    sparsify,
    synth_scene,
    write_lines,
    write_ply,
)
from .neighborhood import (
    NeighborList,
    PointEstimates,
    intersect,
    knn_line_line,
    knn_line_point,
    knn_point_line,
    oracle_neighbors,
)
from .peakfind import (
    CandidateSet,
    KuiperStats,
    PeakResult,
    candidates,
    empirical_cdf,
    find_peak,
    kuiper,
    split_peaks,
)
from .recover import (
    PRESETS,
    IterationStats,
    RecoveryConfig,
    RecoveryOutput,
    recover,
    recover_with_oracle,
)

__version__ = "0.1.0"

__all__ = [
    "CandidateSet",
    "ClosestPair",
    "ConfigError",
    "DegenerateWindow",
    "EmptyInput",
    "ErrorReport",
    "InvalidSamples",
    "InvalidSpec",
    "IterationStats",
    "KTooLarge",
    "KuiperStats",
    "Line3",
    "LineCloud",
    "LineCloudError",
    "MisalignedInputs",
    "MonteCarloReport",
    "NeighborList",
    "NoCandidates",
    "PRESETS",
    "ParallelLines",
    "ParseError",
    "PeakResult",
    "PointCloud",
    "PointEstimates",
    "RecoveryConfig",
    "RecoveryOutput",
    "SceneSpec",
    "TooFewCandidates",
    "TooFewValidEstimates",
    "UnsupportedFormat",
    "ZeroSurvivors",
    "candidates",
    "closest_points",
    "empirical_cdf",
    "error_report",
    "find_peak",
    "intersect",
    "knn_line_line",
    "knn_line_point",
    "knn_point_line",
    "kuiper",
    "lift",
    "line_line_distance",
    "montecarlo_two_point",
    "oracle_neighbors",
    "point_line_distance",
    "point_point_distance",
    "read_lines",
    "read_ply",
    "reanchor",
    "recover",
    "recover_with_oracle",
    "remove_statistical_outliers",
    "sample_uniform_direction",
    "sample_uniform_directions",
    "sparsify",
    "sparsity_sweep",
    "split_peaks",
    "synth_scene",
    "write_cdf_csv",
    "write_lines",
    "write_mc_cdf_csv",
    "write_ply",
    "write_sweep_csv",
]
