"""permgamp: material permittivity estimation from path-loss measurements.

A 2D image-method ray tracer provides the forward map from relative
permittivities to dB link gains; the estimator linearizes that map and runs
multi-step Gaussian message passing with a trust region on the interval
prior. A brute-force grid oracle ships alongside for verification.
"""

from .errors import (
    GridSizeError,
    ParseError,
    SolverError,
    UnusableLinkError,
    ValidationError,
)
from .scenario import (
    Dataset,
    Link,
    Material,
    Scenario,
    Surface,
    bundled_scenario_path,
    load_dataset,
    load_scenario,
    make_canyon_scenario,
    make_free_space_scenario,
    normalize_measurements,
    save_dataset,
    save_scenario,
    synthesize_dataset,
)
from .raytracer import Ray, Reflection, trace_link, trace_scenario
from .forward_model import (
    Linearization,
    forward,
    fresnel_power_coeff,
    jacobian,
    link_gain_db,
    ray_gain_linear,
)
from .trunc_gauss import Interval, clamp_to_interval, truncated_moments
from .gamp import (
    EstimateReport,
    GampConfig,
    GampState,
    default_config,
    init_state,
    input_step,
    output_step,
    report_to_dict,
    report_to_json,
    solve,
)
from .oracle import GridSpec, grid_map, log_posterior, quadrature_moments
from .experiment import (
    ExperimentConfig,
    prepare_problem,
    run_estimate,
    run_sweep,
    write_sweep_outputs,
)

__version__ = "0.1.0"

__all__ = [
    "Dataset",
    "EstimateReport",
    "ExperimentConfig",
    "GampConfig",
    "GampState",
    "GridSizeError",
    "GridSpec",
    "Interval",
    "Linearization",
    "Link",
    "Material",
    "ParseError",
    "Ray",
    "Reflection",
    "Scenario",
    "SolverError",
    "Surface",
    "UnusableLinkError",
    "ValidationError",
    "bundled_scenario_path",
    "clamp_to_interval",
    "default_config",
    "forward",
    "fresnel_power_coeff",
    "grid_map",
    "init_state",
    "input_step",
    "jacobian",
    "link_gain_db",
    "load_dataset",
    "load_scenario",
    "log_posterior",
    "make_canyon_scenario",
    "make_free_space_scenario",
    "normalize_measurements",
    "output_step",
    "prepare_problem",
    "quadrature_moments",
    "ray_gain_linear",
    "report_to_dict",
    "report_to_json",
    "run_estimate",
    "run_sweep",
    "save_dataset",
    "save_scenario",
    "solve",
    "synthesize_dataset",
    "trace_link",
    "trace_scenario",
    "truncated_moments",
    "write_sweep_outputs",
]
