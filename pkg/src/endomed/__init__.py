"""Two-way effect decomposition with an endogenous binary mediator.

Total effect from OLS on ``(X, XD, XZ, XDZ)``, direct effect from IVE on
``(X, XD, XM, XDZ)`` with ``XM`` instrumented by ``XZ``, indirect effect as
their difference; standard errors from influence values.
"""

from .core import (
    FitResult,
    ProbitFit,
    influence_se,
    influence_values,
    ive_fit,
    normal_cdf,
    ols_fit,
    probit_fit,
)
from .decomposition import (
    ALL_METHODS,
    Effect,
    EffectEstimates,
    Method,
    decompose,
    group_mean_difference,
)
from .designs import (
    Dataset,
    DesignSet,
    build_covariate_designs,
    build_exogenous_designs,
    build_score_designs,
)
from .errors import *  # noqa: F401,F403
from .ingest import ColumnSpec, QuantileRule, build_dataset, build_star_dataset, empirical_quantile, load_csv
from .simulation import (
    PotentialTables,
    SimulationDesign,
    SimulationReport,
    generate_replication,
    run_monte_carlo,
    true_effects,
)

__version__ = "0.1.0"
