"""Data-constrained scaling laws: fitting, analysis, and allocation."""

from .allocate import (
    AllocationPoint,
    AllocationQuery,
    find_crossover,
    solve_allocation,
    trace_frontier,
)
from .analysis import (
    BootstrapReport,
    ResidualCell,
    SharedPowerFit,
    bootstrap_fit,
    compare_bases,
    compute_residuals,
    fit_shared_power,
    penalty_reduction,
)
from .data import (
    Dataset,
    SyntheticSpec,
    generate_synthetic,
    load_law_spec,
    load_muennighoff_csv,
    load_native_csv,
    preset_grid,
    read_report,
    save_law_spec,
    write_report,
)
from .fit import (
    FitConfig,
    FitReport,
    RunRecord,
    compute_metrics,
    fit_phase1,
    fit_phase2,
    huber_log_objective,
)
from .laws import (
    AddPenalty1,
    AddPenalty2,
    AddPenalty4,
    Chinchilla,
    ChinchillaParams,
    EffectiveParam,
    ExpDecayData,
    LawSpec,
    RunPoint,
    chinchilla_n_opt,
    effective_data,
    effective_params,
    eval_chinchilla,
    eval_law,
    predict,
    train_flops,
)

__version__ = "0.1.0"
