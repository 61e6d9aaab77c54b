"""Inspection performance metrics and stratified team-coefficient models."""

from .analysis import (
    Comparison,
    Perturbation,
    SensitivityRow,
    TuningSolution,
    compare,
    compare_values,
    predict_ipm,
    sensitivity_scan,
    tune_parameter,
)
from .calibration import CoefficientTable, Stratum, Target, calibrate_all, calibrate_stratum, load_table, save_table
from .dataio import (
    DatasetDocument,
    bundled_calibration_dataset,
    bundled_reference_coefficients,
    bundled_verification_dataset,
    parse_dataset,
    serialize_dataset,
)
from .domain import (
    ExperienceBand,
    FeatureVector,
    IpmMode,
    Phase,
    PhaseRecord,
    ProjectRecord,
    SizeClass,
    band_experience,
    classify_size,
    complexity_x5,
    depth_of_inspection,
    derive_features,
    estimate_function_points,
    inspection_performance,
)
from .regression import (
    CoefficientVector,
    DesignMatrix,
    FitReport,
    SumsOfSquares,
    build_design_matrix,
    fit_least_squares,
    r_squared,
    solve_linear_system,
    sums_of_squares,
)

__version__ = "0.1.0"
