"""Uncertainty-realism checks for regression and classification predictions."""
__version__ = "0.1.0"

from .errors import DataError, RealcheckError, UsageError  # noqa: E402
from .statcore import GaussianSummary, GofResult, chi2_cdf, ks_test, mahalanobis_sq  # noqa: E402
from .regression import (  # noqa: E402
    RegressionBatch,
    RegressionRecord,
    angle_set,
    angle_test,
    mgt_set,
    monotonicity_table,
    msample_set,
    nll_grid,
    realism_test,
    solid_angle_cdf,
)
from .classification import (  # noqa: E402
    ClassificationBatch,
    ClassificationRecord,
    pr_curve,
    roc_curve,
    score_batch,
    scored_set,
    youden_threshold,
)
from .simulator import ClassificationRegime, RegressionRegime, gen_classification, gen_regression  # noqa: E402
from .io_report import (  # noqa: E402
    build_classification_report,
    build_regression_report,
    read_classification,
    read_regression,
    read_report,
    write_report,
)

__all__ = [
    "__version__",
    "RealcheckError", "UsageError", "DataError",
    "GaussianSummary", "GofResult", "chi2_cdf", "ks_test", "mahalanobis_sq",
    "RegressionBatch", "RegressionRecord", "angle_set", "angle_test", "mgt_set",
    "monotonicity_table", "msample_set", "nll_grid", "realism_test", "solid_angle_cdf",
    "ClassificationBatch", "ClassificationRecord", "pr_curve", "roc_curve",
    "score_batch", "scored_set", "youden_threshold",
    "ClassificationRegime", "RegressionRegime", "gen_classification", "gen_regression",
    "build_classification_report", "build_regression_report", "read_classification",
    "read_regression", "read_report", "write_report",
]
