"""Time-varying parameter regression by approximate message passing.

A TVP regression with T observations and p regressors is estimated as a
static regression with (T+1)p coefficients under a hierarchical shrinkage
prior, solved by an O(Tp)-per-iteration message passing algorithm with
EM prior updates and a mixture-approximation volatility estimator.
"""

from .design import (
    CoefficientPath,
    DenseOperator,
    PcaModel,
    TvpDesignOperator,
    as_operator,
    build_tvp_operator,
    fit_pca,
    transform_pca,
)
from .dgp import SimOutput, SimSpec, orthogonalize, replication_rng, simulate
from .forecast import (
    ForecastRecord,
    ForecastSpec,
    RecursiveResult,
    cumulative_sfe,
    dm_statistic,
    forecast_at_origin,
    log_apl,
    log_apl_spread,
    msfe,
    relative_msfe,
    run_recursive,
)
from .gamp import (
    GampConfig,
    GampDivergenceError,
    GampState,
    em_alpha_update,
    gamp_input_step,
    gamp_output_step,
    gamp_solve,
    solve_fixed_alpha,
)
from .ingest import (
    FrameSpec,
    RawPanel,
    RegressionFrame,
    StationaryPanel,
    apply_transform,
    build_inflation_target,
    make_regression_frame,
    read_panel_csv,
    transform_panel,
)
from .oracles import (
    GibbsConfig,
    PosteriorDraws,
    ad_statistic,
    exact_gaussian_posterior,
    gibbs_lasso,
    gibbs_ssvs,
    ols,
    ols_per_predictor,
)
from .volatility import (
    MIXTURE7,
    MixtureTable,
    VolatilityPath,
    em_constant_variance,
    sv_update,
)

__version__ = "0.1.0"
