"""Bivariate cause-effect discovery: conditional GANs scored by the two-sample test.

The idea mirrors a structural equation y = g(x, n): a conditional generator
receives the candidate cause plus independent noise and synthesizes the
candidate effect.  One CGAN is trained per direction; each synthesizes a
dataset paired with the real conditioning values, and the direction whose
synthetic data is *least* distinguishable from the real data (smallest
classifier two-sample statistic, k-NN variant by default) wins.  Because
adversarial training is unstable, an ensemble is trained per direction and
the best member (smallest statistic) represents that direction.

Scoring always trains a fresh classifier on a fresh split of real-vs-
synthetic data; the CGAN's own discriminator is never reused, since it may
have overfitted to generator artifacts.

Member randomness is keyed only by the member index, never by direction, so
swapping the input columns flips the two per-direction statistics exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .baselines import KernelConfig, mmd_linear_test
from .classifiers import Adam, NetParams, bce_loss, net_backward, net_forward, sigmoid
from .core import C2stConfig, c2st_run
from .numerics import Rng, standardize

__all__ = [
    "DIR_XY",
    "DIR_YX",
    "CganConfig",
    "Cgan",
    "CauseEffectConfig",
    "MemberRecord",
    "CausalVerdict",
    "cgan_train",
    "cgan_synthesize",
    "discriminator_loss_grad",
    "generator_loss_grad",
    "cause_effect",
    "read_pair_file",
]

DIR_XY = "x->y"
DIR_YX = "y->x"
_FINITE_CHECK_EVERY = 50


@dataclass(frozen=True)
class CganConfig:
    """Generator/discriminator architecture and optimization settings.

    One hidden layer of 32 ReLU units each; scalar N(0,1) noise input; one
    discriminator step per generator step; Adam at 1e-3; 3000 iterations of
    batch 64 drawn with replacement.  The first moment decay is 0.5, the
    usual choice for adversarial training: 0.9 makes the two players
    oscillate instead of converge on these small problems.
    """

    hidden: int = 32
    noise_sd: float = 1.0
    iterations: int = 3000
    batch_size: int = 64
    learning_rate: float = 1e-3
    beta1: float = 0.5
    beta2: float = 0.999
    eps: float = 1e-8

    def __post_init__(self):
        if self.iterations < 0 or self.batch_size < 1 or self.hidden < 1:
            raise ValueError("invalid CGAN configuration")


@dataclass
class Cgan:
    """A trained conditional GAN for one direction.

    ``generator`` maps (conditioning value, noise) to a synthetic effect with
    a linear output; ``discriminator`` maps (conditioning value, effect) to a
    realness probability through a sigmoid.
    """

    direction: str
    generator: NetParams
    discriminator: NetParams
    config: CganConfig


def _generator_values(gen: NetParams, cond: np.ndarray, z: np.ndarray) -> np.ndarray:
    logits, _ = net_forward(gen, np.column_stack([cond, z]))
    return logits


def discriminator_loss_grad(disc: NetParams, cond: np.ndarray, real: np.ndarray,
                            fake: np.ndarray):
    """Discriminator objective l(d(c, real), 1) + l(d(c, fake), 0) and its gradient.

    ``fake`` enters as plain values (no generator gradient).  Both expectation
    terms are batch means; the returned gradient is exact backprop.
    """
    b = cond.shape[0]
    inputs = np.vstack([np.column_stack([cond, real]), np.column_stack([cond, fake])])
    targets = np.concatenate([np.ones(b), np.zeros(fake.shape[0])])
    logits, cache = net_forward(disc, inputs)
    probs = sigmoid(logits)
    loss = bce_loss(probs[:b], targets[:b]) + bce_loss(probs[b:], targets[b:])
    dlogits = np.concatenate([(probs[:b] - 1.0) / b, probs[b:] / fake.shape[0]])
    grad = NetParams(disc.d, disc.hidden)
    net_backward(disc, cache, dlogits, grad)
    return loss, grad


def generator_loss_grad(gen: NetParams, disc: NetParams, cond: np.ndarray,
                        real: np.ndarray | None, z: np.ndarray,
                        include_real_term: bool = True):
    """Generator objective l(d(c, y), 0) + l(d(c, g(c, z)), 1) and its gradient.

    Only the synthetic term depends on the generator, so the gradient flows
    through the (frozen) discriminator into the generator; the real term only
    contributes to the reported loss value and can be skipped in the training
    loop.
    """
    b = cond.shape[0]
    fake, gen_cache = net_forward(gen, np.column_stack([cond, z]))
    logits, disc_cache = net_forward(disc, np.column_stack([cond, fake]))
    probs = sigmoid(logits)
    loss = bce_loss(probs, np.ones(b))
    if include_real_term:
        if real is None:
            raise ValueError("real values required when include_real_term=True")
        real_logits, _ = net_forward(disc, np.column_stack([cond, real]))
        loss += bce_loss(sigmoid(real_logits), np.zeros(b))
    dlogits = (probs - 1.0) / b
    disc_scratch = NetParams(disc.d, disc.hidden)
    dinputs = net_backward(disc, disc_cache, dlogits, disc_scratch, want_dx=True)
    grad = NetParams(gen.d, gen.hidden)
    net_backward(gen, gen_cache, dinputs[:, 1], grad)
    return loss, grad


def cgan_train(rng: Rng, pairs: np.ndarray, direction: str,
               config: CganConfig = CganConfig()) -> Cgan:
    """Alternating Adam on the discriminator and generator objectives.

    ``pairs`` is an n x 2 matrix with columns already standardized; the
    conditioning column is 0 for "x->y" and 1 for "y->x".  Deterministic
    given the rng (init order: generator then discriminator; per iteration:
    batch indices, noise, discriminator step, fresh batch + noise, generator
    step).  Aborts if any parameter becomes non-finite.
    """
    pairs = np.asarray(pairs, dtype=np.float64)
    if pairs.ndim != 2 or pairs.shape[1] != 2:
        raise ValueError(f"pairs must be an n x 2 matrix, got shape {pairs.shape}")
    if pairs.shape[0] < 50:
        raise ValueError(f"need at least 50 pairs, got {pairs.shape[0]}")
    if not np.all(np.isfinite(pairs)):
        raise ValueError("pairs contain non-finite entries")
    if direction not in (DIR_XY, DIR_YX):
        raise ValueError(f"direction must be {DIR_XY!r} or {DIR_YX!r}")
    cond = pairs[:, 0] if direction == DIR_XY else pairs[:, 1]
    target = pairs[:, 1] if direction == DIR_XY else pairs[:, 0]
    n = pairs.shape[0]
    gen = NetParams(2, config.hidden).glorot_init(rng)
    disc = NetParams(2, config.hidden).glorot_init(rng)
    adam_g = Adam(gen.size, config.learning_rate, config.beta1, config.beta2, config.eps)
    adam_d = Adam(disc.size, config.learning_rate, config.beta1, config.beta2, config.eps)
    gen_grad = NetParams(2, config.hidden)
    disc_grad = NetParams(2, config.hidden)
    disc_scratch = NetParams(2, config.hidden)
    b = config.batch_size
    for it in range(config.iterations):
        # Discriminator step.
        idx = rng.gen.integers(0, n, b)
        z = config.noise_sd * rng.gen.standard_normal(b)
        c = cond[idx]
        fake = _generator_values(gen, c, z)
        _, dgrad = _disc_step(disc, c, target[idx], fake, disc_grad)
        adam_d.step(disc.flat, dgrad.flat)
        # Generator step on a fresh batch.
        idx = rng.gen.integers(0, n, b)
        z = config.noise_sd * rng.gen.standard_normal(b)
        c = cond[idx]
        fake, gen_cache = net_forward(gen, np.column_stack([c, z]))
        logits, disc_cache = net_forward(disc, np.column_stack([c, fake]))
        probs = sigmoid(logits)
        dlogits = (probs - 1.0) / b
        dinputs = net_backward(disc, disc_cache, dlogits, disc_scratch, want_dx=True)
        net_backward(gen, gen_cache, dinputs[:, 1], gen_grad)
        adam_g.step(gen.flat, gen_grad.flat)
        if (it + 1) % _FINITE_CHECK_EVERY == 0:
            _check_finite(gen, disc)
    _check_finite(gen, disc)
    return Cgan(direction, gen, disc, config)


def _disc_step(disc, cond, real, fake, grad):
    b = cond.shape[0]
    inputs = np.vstack([np.column_stack([cond, real]), np.column_stack([cond, fake])])
    logits, cache = net_forward(disc, inputs)
    probs = sigmoid(logits)
    dlogits = np.concatenate([(probs[:b] - 1.0) / b, probs[b:] / b])
    net_backward(disc, cache, dlogits, grad)
    return probs, grad


def _check_finite(gen: NetParams, disc: NetParams) -> None:
    if not (np.all(np.isfinite(gen.flat)) and np.all(np.isfinite(disc.flat))):
        raise FloatingPointError("CGAN parameters became non-finite during training")


def cgan_synthesize(cgan: Cgan, conditioning: np.ndarray, rng: Rng) -> np.ndarray:
    """One synthetic pair per conditioning value, with fresh i.i.d. noise.

    The conditioning values are copied verbatim into their original column;
    the generated values fill the other column.
    """
    cond = np.asarray(conditioning, dtype=np.float64).reshape(-1)
    z = cgan.config.noise_sd * rng.gen.standard_normal(cond.shape[0])
    values = _generator_values(cgan.generator, cond, z)
    if cgan.direction == DIR_XY:
        return np.column_stack([cond, values])
    return np.column_stack([values, cond])


@dataclass(frozen=True)
class CauseEffectConfig:
    """Ensemble size, CGAN settings, and the scoring test variant."""

    ensemble: int = 10
    cgan: CganConfig = field(default_factory=CganConfig)
    scoring: str = "knn"  # "knn" (default), "nn", or "mmd"
    scoring_train_fraction: float = 0.5

    def __post_init__(self):
        if self.ensemble < 1:
            raise ValueError("ensemble size must be >= 1")
        if self.scoring not in ("knn", "nn", "mmd"):
            raise ValueError(f"scoring must be 'knn', 'nn', or 'mmd', got {self.scoring!r}")


@dataclass
class MemberRecord:
    """Trace of one ensemble member in one direction."""

    member: int
    direction: str
    statistic: float | None
    diverged: bool = False


@dataclass
class CausalVerdict:
    """Chosen direction with both per-direction statistics and the full trace."""

    direction: str
    t_xy: float
    t_yx: float
    tie: bool
    ensemble: list[MemberRecord]

    def to_record(self) -> dict:
        return {
            "direction": self.direction,
            "t_xy": self.t_xy,
            "t_yx": self.t_yx,
            "tie": self.tie,
            "ensemble": [
                {"member": m.member, "direction": m.direction,
                 "statistic": m.statistic, "diverged": m.diverged}
                for m in self.ensemble
            ],
        }


def _score_statistic(real: np.ndarray, synthetic: np.ndarray, rng: Rng,
                     config: CauseEffectConfig) -> float:
    if config.scoring == "mmd":
        return mmd_linear_test(real, synthetic, KernelConfig(), rng=rng).statistic
    cfg = C2stConfig(classifier=config.scoring,
                     train_fraction=config.scoring_train_fraction)
    return c2st_run(real, synthetic, cfg, rng=rng).statistic


def cause_effect(rng: Rng, pairs: np.ndarray,
                 config: CauseEffectConfig = CauseEffectConfig()) -> CausalVerdict:
    """Decide between "x causes y" and "y causes x" for an n x 2 sample.

    Standardizes the columns, trains ``config.ensemble`` CGANs per direction,
    scores each member's synthetic dataset against the real data, keeps the
    best (smallest) statistic per direction, and prefers the direction with
    the smaller best statistic.  An exact tie is reported as x->y with the
    tie flag set.

    Member streams are derived as ``rng.child(member, step)`` with step 0 =
    training, 1 = synthesis noise, 2 = scoring; both directions reuse the
    same streams, which makes column-swap anti-symmetry exact (for the
    default k-NN scorer).  Diverged members are skipped; it is an error only
    if every member of a direction diverges.
    """
    pairs = standardize(pairs)
    trace: list[MemberRecord] = []
    best = {}
    for direction in (DIR_XY, DIR_YX):
        cond_col = 0 if direction == DIR_XY else 1
        stats = []
        for member in range(config.ensemble):
            try:
                cgan = cgan_train(rng.child(member, 0), pairs, direction, config.cgan)
                synthetic = cgan_synthesize(cgan, pairs[:, cond_col], rng.child(member, 1))
                stat = _score_statistic(pairs, synthetic, rng.child(member, 2), config)
            except FloatingPointError:
                trace.append(MemberRecord(member, direction, None, diverged=True))
                continue
            trace.append(MemberRecord(member, direction, stat))
            stats.append(stat)
        if not stats:
            raise FloatingPointError(
                f"all {config.ensemble} members diverged for direction {direction}")
        best[direction] = min(stats)
    t_xy, t_yx = best[DIR_XY], best[DIR_YX]
    tie = t_xy == t_yx
    direction = DIR_XY if t_xy <= t_yx else DIR_YX
    return CausalVerdict(direction, t_xy, t_yx, tie, trace)


def read_pair_file(path) -> np.ndarray:
    """Read a whitespace-separated two-column numeric file into an n x 2 matrix."""
    rows = []
    path = Path(path)
    with path.open("r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            tokens = line.split()
            if not tokens:
                continue
            if len(tokens) != 2:
                raise ValueError(f"{path}:{line_no}: expected 2 columns, got {len(tokens)}")
            try:
                values = [float(t) for t in tokens]
            except ValueError as exc:
                raise ValueError(f"{path}:{line_no}: non-numeric token") from exc
            if not all(math.isfinite(v) for v in values):
                raise ValueError(f"{path}:{line_no}: non-finite value")
            rows.append(values)
    if len(rows) < 2:
        raise ValueError(f"{path}: needs at least 2 rows")
    return np.asarray(rows, dtype=np.float64)
