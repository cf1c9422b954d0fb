"""Pricing path-dependent payoffs as linear functionals on truncated signatures."""

from .calibration import (
    ConditionRanges,
    Dataset,
    DatasetMode,
    FitResult,
    build_dataset,
    evaluate,
    fit,
    r_squared,
    sample_conditions,
    signature_price,
)
from .estimators import ExpectedSignatureFeatures, SignatureFeatures, SignatureRegressor, make_signature_pricer
from .expected_signature import ExpPolySum, FTable, alpha, build_f_table, convolve, en, phi, reduce_threes
from .market import MarketCondition, SimConfig, discount_factor, mc_expected_signature, simulate_gbm_path
from .paths import AugmentedPath, SampledPath, augment, path_signature, segment_signature
from .payoffs import (
    GroundTruthConfig,
    PayoffKind,
    PayoffSpec,
    asian_forward_functional,
    evaluate_payoff,
    forward_functional,
    ground_truth_price,
    price_functional,
)
from .tensor_algebra import (
    LinearFunctional,
    TruncatedTensor,
    add,
    apply_functional,
    exp_level1,
    project,
    shuffle_product,
    tensor_product,
    word_enumeration,
)

__version__ = "0.1.0"
