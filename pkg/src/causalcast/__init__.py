"""causalcast: causality-guided multivariate time series forecasting.

Discover the drivers of a target series with multivariate Granger causality
or PCMCI+-style constraint-based discovery, then train a GRU-LSTM hybrid on
the causally selected features and evaluate multi-horizon forecasts.
"""

from .errors import CausalcastError, ConfigError, DataError, NumericalError
from .frame import (
    DAILY,
    MONTHLY,
    NormalizationParams,
    SupervisedWindows,
    TimeSeriesFrame,
    VariableMeta,
    aggregate_to_monthly,
    denormalize,
    impute_linear,
    load_csv,
    make_windows,
    normalize,
    save_csv,
    split_by_date,
)
from .graph import (
    CausalEdge,
    CausalGraph,
    adjacency_summary,
    benjamini_hochberg,
    feature_select,
    read_edge_list,
    write_edge_list,
)
from .metrics import (
    ExperimentConfig,
    MetricsCell,
    MetricsReport,
    forecast_metrics,
    mae,
    r_squared,
    rmse,
    run_experiment,
    write_r2_svg,
    write_report_csv,
    write_report_json,
)
from .pcmci import (
    CiTestResult,
    ParentSet,
    ci_pvalue,
    ci_test,
    contemporaneous_phase,
    mci_prune,
    parcorr,
    pc1_lagged_parents,
    pcmciplus_run,
)
from .synth import Mechanism, ScmSpec, Term, generate, score_graph
from .var import GcResult, VarModel, fit_var, gc_test, mvgc_graph, select_order

__version__ = "0.1.0"
