"""Classifier two-sample tests, classical baselines, and CGAN cause-effect discovery."""

from .numerics import (
    GaussianApprox,
    Rng,
    binomial_half_tail,
    normal_cdf,
    normal_quantile,
    sample_normal,
    sample_sinusoid,
    sample_student_t,
    standardize,
)
from .classifiers import (
    KnnClassifier,
    LabeledDataset,
    MlpClassifier,
    MlpHyper,
    knn_predict,
    mlp_forward,
    mlp_loss_grad,
    mlp_train,
)
from .core import (
    C2stConfig,
    C2stOutcome,
    InterpretReport,
    PowerQuery,
    TestOutcome,
    c2st_alternative_approx,
    c2st_interpret,
    c2st_power,
    c2st_pvalue,
    c2st_pvalue_exact,
    c2st_run,
    c2st_statistic,
)
from .baselines import KernelConfig, ks_test, kuiper_test, mmd_linear_test, wmw_test
from .experiments import (
    ErrorTable,
    TrialGrid,
    run_experiment,
    run_gauss_student,
    run_named_test,
    run_sinusoid_independence,
    run_type1,
)
from .causal import (
    CausalVerdict,
    CauseEffectConfig,
    Cgan,
    CganConfig,
    cause_effect,
    cgan_synthesize,
    cgan_train,
    read_pair_file,
)

__version__ = "0.1.0"
