"""The classifier two-sample test: protocol, null law, power, and reports.

The test proceeds in five steps: pool the two samples with labels 0/1,
shuffle once, split into disjoint train/test halves, train a classifier on
the training half, and score held-out accuracy

    t_hat = mean over the test set of 1[ 1(f(z) > 1/2) = label ].

Under "same distribution" the correct-classification count is
Binomial(n_te, 1/2), so the statistic is approximately N(1/2, 1/(4 n_te))
and the one-sided p-value follows directly; under the alternative the count
is Poisson-Binomial, approximated by Binomial(n_te, p_bar) with matching
mean.  The closed-form power of the resulting threshold test is
Phi((eps * sqrt(n_te) - PhiInv(1 - alpha)/2) / sqrt(1/4 - eps^2)).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .classifiers import KnnClassifier, LabeledDataset, MlpClassifier, MlpHyper, mlp_train
from .numerics import GaussianApprox, Rng, as_sample, binomial_half_tail, normal_cdf, normal_quantile

__all__ = [
    "TestOutcome",
    "C2stConfig",
    "C2stOutcome",
    "PerExample",
    "PowerQuery",
    "InterpretReport",
    "c2st_run",
    "c2st_statistic",
    "c2st_pvalue",
    "c2st_pvalue_exact",
    "c2st_alternative_approx",
    "c2st_power",
    "c2st_interpret",
]


@dataclass
class TestOutcome:
    """Uniform result record shared by every test in the toolkit."""

    test: str
    statistic: float
    pvalue: float
    alpha: float = 0.05
    reject: bool = False
    details: dict = field(default_factory=dict)

    def to_record(self) -> dict:
        return {
            "test": self.test,
            "statistic": self.statistic,
            "p_value": self.pvalue,
            "alpha": self.alpha,
            "reject": self.reject,
            **{k: v for k, v in self.details.items()},
        }


@dataclass
class PerExample:
    """Per-test-example trace: pooled row index, true label, p(label=1 | z)."""

    index: np.ndarray
    label: np.ndarray
    prob: np.ndarray

    def __len__(self) -> int:
        return self.index.shape[0]


@dataclass
class C2stOutcome(TestOutcome):
    """Outcome of one classifier two-sample test run."""

    n_te: int = 0
    seed: int | None = None
    per_example: PerExample | None = None
    test_x: np.ndarray | None = None

    def to_record(self, include_per_example: bool = False) -> dict:
        rec = {
            "test": self.test,
            "statistic": self.statistic,
            "n_te": self.n_te,
            "p_value": self.pvalue,
            "alpha": self.alpha,
            "reject": self.reject,
            "classifier": self.details.get("classifier"),
            "seed": self.seed,
        }
        if include_per_example and self.per_example is not None:
            rec["per_example"] = {
                "index": self.per_example.index.tolist(),
                "label": self.per_example.label.tolist(),
                "prob": self.per_example.prob.tolist(),
            }
        return rec


@dataclass(frozen=True)
class C2stConfig:
    """Configuration of one test run.

    ``train_fraction`` is the share of the pooled 2n rows used for training
    (the protocol itself does not fix the ratio; 1/2 is the default here).
    ``exact_null`` swaps the Gaussian p-value for the exact Binomial tail,
    available for n_te up to 1e4.
    """

    classifier: str = "nn"
    train_fraction: float = 0.5
    alpha: float = 0.05
    seed: int = 0
    exact_null: bool = False
    mlp: MlpHyper = field(default_factory=MlpHyper)
    knn_k: int | None = None

    def __post_init__(self):
        if self.classifier not in ("nn", "knn"):
            raise ValueError(f"classifier must be 'nn' or 'knn', got {self.classifier!r}")
        if not 0.0 < self.train_fraction < 1.0:
            raise ValueError(f"train_fraction must be in (0, 1), got {self.train_fraction}")
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError(f"alpha must be in [0, 1], got {self.alpha}")


def c2st_statistic(predictions, labels) -> float:
    """Held-out accuracy under the prediction rule 1(f(z) > 1/2).

    A probability of exactly 1/2 is not greater than 1/2 and therefore
    predicts class 0.
    """
    probs = np.asarray(predictions, dtype=np.float64)
    y = np.asarray(labels)
    if probs.shape != y.shape or probs.ndim != 1:
        raise ValueError("predictions and labels must be equal-length vectors")
    if probs.shape[0] < 1:
        raise ValueError("empty input")
    predicted = (probs > 0.5).astype(np.int64)
    return float(np.mean(predicted == y))


def c2st_pvalue(t_hat: float, n_te: int) -> float:
    """One-sided p-value from the N(1/2, 1/(4 n_te)) null approximation.

    One-sided because the accuracy exceeds chance level under the
    alternative; values below 1/2 are evidence for the null.
    """
    if not 0.0 <= t_hat <= 1.0:
        raise ValueError(f"accuracy must be in [0, 1], got {t_hat}")
    if n_te < 1:
        raise ValueError(f"n_te must be >= 1, got {n_te}")
    z = (float(t_hat) - 0.5) * math.sqrt(4.0 * n_te)
    return normal_cdf(-z)


def c2st_pvalue_exact(t_hat: float, n_te: int, mid_p: bool = False) -> float:
    """Exact Binomial(n_te, 1/2) tail P[T >= t_hat] on the accuracy lattice.

    ``mid_p=True`` returns the mid-p variant (half weight on the observed
    lattice point), which is what the continuity-uncorrected Gaussian
    approximation estimates.
    """
    if not 0.0 <= t_hat <= 1.0:
        raise ValueError(f"accuracy must be in [0, 1], got {t_hat}")
    n_te = int(n_te)
    if not 1 <= n_te <= 10_000:
        raise ValueError(f"exact tail supported for 1 <= n_te <= 10000, got {n_te}")
    k = int(math.ceil(t_hat * n_te - 1e-9))
    return binomial_half_tail(n_te, k, mid_p=mid_p)


def c2st_alternative_approx(p_bar: float, n_te: int) -> GaussianApprox:
    """Normal approximation N(p_bar, p_bar (1 - p_bar) / n_te) to the alternative.

    The correct-count under the alternative is Poisson-Binomial; matching its
    mean with Binomial(n_te, p_bar) and applying the CLT gives this law.  Only
    the mean is exact; no error bound is claimed for higher moments.
    """
    if not 0.0 < p_bar < 1.0:
        raise ValueError(f"mean accuracy must be in (0, 1), got {p_bar}")
    if n_te < 1:
        raise ValueError(f"n_te must be >= 1, got {n_te}")
    return GaussianApprox(float(p_bar), float(p_bar) * (1.0 - float(p_bar)) / n_te)


@dataclass(frozen=True)
class PowerQuery:
    """Inputs of the closed-form power: level, test size, effect size."""

    alpha: float
    n_te: int
    epsilon: float

    def __post_init__(self):
        if not 0.0 < self.alpha < 1.0:
            raise ValueError(f"alpha must be in (0, 1), got {self.alpha}")
        if self.n_te < 1:
            raise ValueError(f"n_te must be >= 1, got {self.n_te}")
        if not 0.0 < self.epsilon < 0.5:
            raise ValueError(f"effect size must lie strictly in (0, 1/2), got {self.epsilon}")


def c2st_power(query: PowerQuery) -> float:
    """Approximate power Phi((eps sqrt(n_te) - PhiInv(1-alpha)/2) / sqrt(1/4 - eps^2)).

    The rejection threshold uses the null variance 1/4, the accepted-region
    probability the alternative variance 1/4 - eps^2.
    """
    eps = query.epsilon
    z = (eps * math.sqrt(query.n_te) - normal_quantile(1.0 - query.alpha) / 2.0) \
        / math.sqrt(0.25 - eps * eps)
    return normal_cdf(z)


def _split_sizes(n_pool: int, train_fraction: float) -> tuple[int, int]:
    n_tr = int(train_fraction * n_pool)
    n_te = n_pool - n_tr
    if n_tr < 2 or n_te < 1:
        raise ValueError(
            f"split leaves n_tr={n_tr}, n_te={n_te}; need n_tr >= 2 and n_te >= 1")
    return n_tr, n_te


def _run_from_pool(pool: np.ndarray, labels: np.ndarray, config: C2stConfig,
                   rng: Rng) -> C2stOutcome:
    """Shuffle/split/train/score on an already-pooled labelled dataset.

    Consumes the rng in a fixed order: one shuffle permutation, then (for the
    network) initialization and per-epoch batch orders.
    """
    n_pool = pool.shape[0]
    n_tr, n_te = _split_sizes(n_pool, config.train_fraction)
    perm = rng.gen.permutation(n_pool)
    tr_idx, te_idx = perm[:n_tr], perm[n_tr:]
    tr_labels = labels[tr_idx]
    if tr_labels.min() == tr_labels.max():
        raise ValueError("degenerate split: training set contains a single class")
    train = LabeledDataset(pool[tr_idx], tr_labels)
    if config.classifier == "nn":
        clf = mlp_train(rng, train, config.mlp)
        name = "c2st-nn"
    else:
        clf = KnnClassifier(train.x, train.labels, k=config.knn_k)
        name = "c2st-knn"
    test_x = pool[te_idx]
    probs = clf.predict_proba(test_x)
    te_labels = labels[te_idx]
    t_hat = c2st_statistic(probs, te_labels)
    if config.exact_null:
        pvalue = c2st_pvalue_exact(t_hat, n_te)
    else:
        pvalue = c2st_pvalue(t_hat, n_te)
    outcome = C2stOutcome(
        test=name,
        statistic=t_hat,
        pvalue=pvalue,
        alpha=config.alpha,
        reject=bool(pvalue < config.alpha),
        details={"classifier": config.classifier, "n_tr": n_tr,
                 "exact_null": config.exact_null},
        n_te=n_te,
        seed=config.seed,
        per_example=PerExample(index=te_idx.copy(), label=te_labels.copy(), prob=probs),
        test_x=test_x,
    )
    outcome._classifier = clf  # kept for interpretability; not serialized
    return outcome


def c2st_run(s_p, s_q, config: C2stConfig = C2stConfig(), rng: Rng | None = None) -> C2stOutcome:
    """Run the five-step classifier two-sample test.

    Rows of ``s_p`` get label 0 and rows of ``s_q`` label 1; the pooled
    dataset is shuffled once and split into disjoint train/test parts.  The
    two samples must have equal size and dimension.  When ``rng`` is omitted
    a fresh stream is built from ``config.seed``.
    """
    x = as_sample(s_p, "s_p")
    y = as_sample(s_q, "s_q")
    if x.shape[1] != y.shape[1]:
        raise ValueError(f"dimension mismatch: {x.shape[1]} vs {y.shape[1]}")
    if x.shape[0] != y.shape[0]:
        raise ValueError(f"samples must have equal size, got {x.shape[0]} and {y.shape[0]}")
    if rng is None:
        rng = Rng(config.seed)
    pool = np.vstack([x, y])
    labels = np.concatenate([np.zeros(x.shape[0], dtype=np.int64),
                             np.ones(y.shape[0], dtype=np.int64)])
    return _run_from_pool(pool, labels, config, rng)


@dataclass
class InterpretReport:
    """Where and how the two samples differ, read off the trained classifier.

    ``order`` ranks test examples by |f(z) - 1/2| descending (most confident
    first).  The feature block is present only for the network classifier:
    the first-layer weight rows, the row most activated on label-1 examples,
    the row most activated on label-0 examples, and their difference.
    """

    index: np.ndarray
    label: np.ndarray
    prob: np.ndarray
    predicted: np.ndarray
    correct: np.ndarray
    confidence: np.ndarray
    first_layer_weights: np.ndarray | None = None
    positive_unit: int | None = None
    negative_unit: int | None = None
    positive_feature: np.ndarray | None = None
    negative_feature: np.ndarray | None = None
    discriminative_feature: np.ndarray | None = None

    def __len__(self) -> int:
        return self.index.shape[0]


def c2st_interpret(outcome: C2stOutcome, classifier) -> InterpretReport:
    """Rank test examples by confidence and extract learned features.

    For the network, unit activations are averaged over the test examples of
    each true label; the most-activated unit per class provides the class
    feature and their difference the discriminative feature.
    """
    per = outcome.per_example
    if per is None:
        raise ValueError("outcome carries no per-example records")
    conf = np.abs(per.prob - 0.5)
    order = np.argsort(-conf, kind="stable")
    report = InterpretReport(
        index=per.index[order],
        label=per.label[order],
        prob=per.prob[order],
        predicted=(per.prob[order] > 0.5).astype(np.int64),
        correct=((per.prob[order] > 0.5).astype(np.int64) == per.label[order]),
        confidence=conf[order],
    )
    if isinstance(classifier, MlpClassifier) and outcome.test_x is not None:
        pre = outcome.test_x @ classifier.params.w1.T + classifier.params.b1
        act = np.maximum(pre, 0.0)
        pos_mask = per.label == 1
        neg_mask = ~pos_mask
        report.first_layer_weights = classifier.params.w1.copy()
        if pos_mask.any() and neg_mask.any():
            pos_unit = int(np.argmax(act[pos_mask].mean(axis=0)))
            neg_unit = int(np.argmax(act[neg_mask].mean(axis=0)))
            report.positive_unit = pos_unit
            report.negative_unit = neg_unit
            report.positive_feature = classifier.params.w1[pos_unit].copy()
            report.negative_feature = classifier.params.w1[neg_unit].copy()
            report.discriminative_feature = (
                report.positive_feature - report.negative_feature)
    return report
