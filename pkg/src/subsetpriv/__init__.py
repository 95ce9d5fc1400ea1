"""Privacy-preserving collection and analysis of categorical data.

Instead of the raw category, each record is a random subset guaranteed
to contain it. The package covers the release mechanisms, distribution
estimation from the released subsets, privacy accounting, independence
testing, a command-line driver, and a live collection service.
"""

from .chi2 import chi2_sf
from .design import (
    ConditionalDesign,
    DummyDesign,
    IndependentDesign,
    ProductDesign,
    ValidationReport,
    draw_subset,
    dummy_wrap,
    fully_private_design,
    induce_conditional,
    sample_dataset,
    small_p_design,
    substream,
    uniform_design,
    validate_conditional,
)
from .errors import (
    AsymmetricBase,
    DegenerateTable,
    DomainTooLarge,
    DomainTooSmall,
    IdentifiabilityViolation,
    IngestError,
    NoPendingQuestion,
    NonInteriorInit,
    QuestionPending,
    SessionExpired,
    SubsetPrivError,
    UnknownVariable,
)
from .estimation import (
    BenchmarkResult,
    EstimateResult,
    check_identifiability,
    em_mle,
    estimate_debias,
    fisher_information,
    log_likelihood,
    mle_asymptotic_covariance,
    mom_general,
    mom_uniform,
    moment_covariance,
    moment_matrix,
    one_step,
    scaled_l2_benchmark,
    uniform_moment_ratio,
)
from .privacy import (
    PerRecordReport,
    PrivacyReport,
    fully_private_report,
    mi_report,
    non_private_report,
    per_record_report,
    population_report,
    prediction_report,
    size_report,
    subset_size,
)
from .schema import (
    CategorySchema,
    Distribution,
    Observations,
    Subset,
    combine_variables,
)
from .testing import (
    ContingencyTable,
    PairDataset,
    TestResult,
    bonferroni_test,
    build_table,
    combined_lrt_test,
    combined_power_study,
    dependent_joint,
    estimate_joint,
    lrt_test,
    paired_permutation_type_i,
    pearson_test,
    permutation_calibrate,
    ranking_study,
    raw_contingency_pearson,
    sample_pair_dataset,
)

__version__ = "0.1.0"
