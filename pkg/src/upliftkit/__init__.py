"""Regression-based uplift modeling: estimators, Qini evaluation, lasso
feature selection and supervised quantization."""

from .data import (
    DataValidationError,
    ParseError,
    SchemaError,
    SplitConfig,
    UpliftDataset,
    UpliftError,
    UpliftWarning,
    encode_all_dummies,
    encode_dummies,
    load_csv,
    load_hillstrom,
    prepare_hillstrom,
    split_uplift,
)
from .estimators import (
    PREDICTION,
    InteractionFit,
    TwoModelFit,
    dual_predict,
    dual_uplift_fit,
    inter_predict,
    inter_uplift_fit,
    load_model,
    predict_uplift,
    save_model,
)
from .glm import FittedLogistic, RankDeficiencyError, fit_logistic
from .lasso import QiniScan, best_features, lasso_path, refit_selected
from .qini import overall_uplift, qini_area, qini_coefficient, qini_table
from .quantize import (
    QuantizationTree,
    RectGrid,
    bin_uplift,
    bin_uplift_categorical,
    bin_uplift_enhanced,
    square_cv,
    square_uplift,
    uplift_split_test,
)

__version__ = "0.1.0"
