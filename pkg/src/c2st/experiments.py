"""Seeded Monte Carlo studies: size control, heavy-tail power, dependence screen.

Three drivers, each producing an :class:`ErrorTable` over a parameter grid:

* ``run_type1``: both samples standard normal; rate = rejection fraction.
* ``run_gauss_student``: standardized normal vs standardized Student-t;
  rate = acceptance fraction (type-II error).
* ``run_sinusoid_independence``: dependence testing via the permutation
  reduction, comparing paired draws (x, cos(delta x) + eps) against a copy
  with one freshly permuted second column; multi-dimensional tests only.

Reproducibility: every trial derives its own child streams from the base
seed and the cell's parameter values, so any cell can be recomputed in
isolation, per-trial seeds never collide, and tables are byte-identical
across reruns.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import product

import numpy as np

from .baselines import KernelConfig, ks_test, kuiper_test, mmd_linear_test, wmw_test
from .core import C2stConfig, TestOutcome, c2st_run
from .numerics import Rng, sample_normal, sample_sinusoid, sample_student_t, standardize

__all__ = [
    "TEST_NAMES",
    "MULTID_TESTS",
    "TrialGrid",
    "Cell",
    "ErrorTable",
    "run_named_test",
    "run_type1",
    "run_gauss_student",
    "run_sinusoid_independence",
    "run_experiment",
]

# Fixed stream ids per test, independent of which tests a run selects.
TEST_NAMES = ("c2st-nn", "c2st-knn", "mmd", "ks", "kuiper", "wmw")
_TEST_STREAM = {name: i + 1 for i, name in enumerate(TEST_NAMES)}
MULTID_TESTS = ("c2st-nn", "c2st-knn", "mmd")

DEFAULT_N_GRID = (25, 50, 100, 500, 1000, 5000, 10000)


def run_named_test(name: str, rng: Rng, s_p, s_q, alpha: float) -> TestOutcome:
    """Dispatch one test by CLI name on a pair of samples."""
    if name == "c2st-nn":
        return c2st_run(s_p, s_q, C2stConfig(classifier="nn", alpha=alpha), rng=rng)
    if name == "c2st-knn":
        return c2st_run(s_p, s_q, C2stConfig(classifier="knn", alpha=alpha), rng=rng)
    if name == "mmd":
        return mmd_linear_test(s_p, s_q, KernelConfig(), alpha=alpha, rng=rng)
    if name == "ks":
        return ks_test(s_p, s_q, alpha=alpha)
    if name == "kuiper":
        return kuiper_test(s_p, s_q, alpha=alpha)
    if name == "wmw":
        return wmw_test(s_p, s_q, alpha=alpha)
    raise ValueError(f"unknown test {name!r}")


@dataclass(frozen=True)
class TrialGrid:
    """Parameter grid plus trial count, base seed, test list, and level.

    Cells are the cross product of the value lists relevant to the
    experiment.  Defaults mirror the synthetic studies: the n sweep
    {25, ..., 10000}, and nu = 3, delta = 1, gamma = 0.25 when held fixed.
    """

    experiment: str
    n_values: tuple[int, ...] = DEFAULT_N_GRID
    nu_values: tuple[float, ...] = (3.0,)
    delta_values: tuple[float, ...] = (1.0,)
    gamma_values: tuple[float, ...] = (0.25,)
    trials: int = 100
    base_seed: int = 0
    tests: tuple[str, ...] = TEST_NAMES
    alpha: float = 0.05

    def __post_init__(self):
        if self.experiment not in ("type1", "gauss-student", "sinusoid"):
            raise ValueError(f"unknown experiment {self.experiment!r}")
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        for values, label in ((self.n_values, "n"), (self.nu_values, "nu"),
                              (self.delta_values, "delta"), (self.gamma_values, "gamma")):
            if len(values) == 0:
                raise ValueError(f"{label} grid must be nonempty")
        if any(n < 2 for n in self.n_values):
            raise ValueError("n values must be >= 2")
        if any(nu <= 0 for nu in self.nu_values):
            raise ValueError("nu values must be positive")
        if any(g < 0 for g in self.gamma_values):
            raise ValueError("gamma values must be nonnegative")
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError("alpha must be in [0, 1]")
        allowed = MULTID_TESTS if self.experiment == "sinusoid" else TEST_NAMES
        for t in self.tests:
            if t not in allowed:
                raise ValueError(f"test {t!r} not applicable to {self.experiment}")


@dataclass
class Cell:
    """One (test, grid point) aggregate."""

    test: str
    params: dict
    trials: int
    rejections: int
    error_kind: str  # "type1" or "type2"

    @property
    def error_rate(self) -> float:
        if self.error_kind == "type1":
            return self.rejections / self.trials
        return (self.trials - self.rejections) / self.trials


@dataclass
class ErrorTable:
    """Collected per-cell error rates for one experiment run."""

    experiment: str
    alpha: float
    trials: int
    base_seed: int
    param_names: tuple[str, ...]
    cells: list[Cell] = field(default_factory=list)

    def to_text(self) -> str:
        """Tab-separated table; deterministic bytes for a given run."""
        lines = [
            f"# experiment={self.experiment} alpha={self.alpha!r} "
            f"trials={self.trials} base_seed={self.base_seed}",
            "\t".join(("test",) + self.param_names
                      + ("trials", "rejections", "error_kind", "error_rate")),
        ]
        for c in self.cells:
            params = tuple(repr(c.params[k]) for k in self.param_names)
            lines.append("\t".join(
                (c.test,) + params
                + (str(c.trials), str(c.rejections), c.error_kind,
                   f"{c.error_rate:.6f}")))
        return "\n".join(lines) + "\n"

    def to_records(self) -> dict:
        return {
            "schema_version": "1",
            "experiment": self.experiment,
            "alpha": self.alpha,
            "trials": self.trials,
            "base_seed": self.base_seed,
            "cells": [
                {
                    "test": c.test,
                    "params": c.params,
                    "trials": c.trials,
                    "rejections": c.rejections,
                    "error_kind": c.error_kind,
                    "error_rate": c.error_rate,
                }
                for c in self.cells
            ],
        }

    def rates(self, test: str) -> dict[tuple, float]:
        """error_rate per parameter tuple (in param_names order) for one test."""
        out = {}
        for c in self.cells:
            if c.test == test:
                out[tuple(c.params[k] for k in self.param_names)] = c.error_rate
        return out


def _cell_key(params: dict) -> tuple[int, ...]:
    """Integer key encoding the cell's parameter values (seed-mixing path)."""
    key = []
    for name in sorted(params):
        v = params[name]
        key.append(int(round(float(v) * 1_000_000)))
    return tuple(key)


def _run_cells(grid: TrialGrid, param_combos, make_samples, tests, error_kind) -> ErrorTable:
    """Shared trial loop: fresh data per trial, fresh child stream per test."""
    root = Rng(grid.base_seed)
    param_names = tuple(sorted(param_combos[0])) if param_combos else ()
    table = ErrorTable(grid.experiment, grid.alpha, grid.trials, grid.base_seed,
                       param_names)
    for params in param_combos:
        key = _cell_key(params)
        rejections = {t: 0 for t in tests}
        for trial in range(grid.trials):
            data_rng = root.child(*key, trial, 0)
            s_p, s_q = make_samples(data_rng, params)
            for t in tests:
                test_rng = root.child(*key, trial, _TEST_STREAM[t])
                outcome = run_named_test(t, test_rng, s_p, s_q, grid.alpha)
                rejections[t] += int(outcome.reject)
        for t in tests:
            table.cells.append(Cell(t, dict(params), grid.trials, rejections[t],
                                    error_kind))
    return table


def run_type1(grid: TrialGrid) -> ErrorTable:
    """Both samples N(0,1): the rejection fraction estimates the type-I error."""
    combos = [{"n": n} for n in grid.n_values]

    def make(rng: Rng, params: dict):
        n = params["n"]
        return sample_normal(rng, n), sample_normal(rng, n)

    return _run_cells(grid, combos, make, grid.tests, "type1")


def run_gauss_student(grid: TrialGrid) -> ErrorTable:
    """Standardized N(0,1) vs standardized Student-t(nu); acceptance = type-II.

    Both samples are shifted and scaled to empirical zero mean and unit
    variance, so only shape (the peaks and tails) separates them.
    """
    combos = [{"n": n, "nu": nu} for n, nu in product(grid.n_values, grid.nu_values)]

    def make(rng: Rng, params: dict):
        n = params["n"]
        a = standardize(sample_normal(rng, n))
        b = standardize(sample_student_t(rng, n, params["nu"]))
        return a, b

    return _run_cells(grid, combos, make, grid.tests, "type2")


def permuted_copy(rng: Rng, pairs: np.ndarray) -> np.ndarray:
    """Break dependence: keep column 0, permute column 1 with one fresh sigma."""
    sigma = rng.gen.permutation(pairs.shape[0])
    return np.column_stack([pairs[:, 0], pairs[sigma, 1]])


def run_sinusoid_independence(grid: TrialGrid) -> ErrorTable:
    """Dependence screen on (x, cos(delta x) + eps) via the permutation reduction.

    Each trial draws paired data, builds the permuted copy {(x_i, y_sigma(i))}
    with a single fresh permutation, and runs each multi-dimensional test
    between the original and permuted samples.  Acceptance = type-II error
    (the data are dependent by construction unless noise drowns the signal).
    """
    tests = tuple(t for t in grid.tests if t in MULTID_TESTS)
    combos = [{"n": n, "delta": d, "gamma": g}
              for n, d, g in product(grid.n_values, grid.delta_values,
                                     grid.gamma_values)]

    def make(rng: Rng, params: dict):
        pairs = sample_sinusoid(rng, params["n"], params["delta"], params["gamma"])
        return pairs, permuted_copy(rng, pairs)

    return _run_cells(grid, combos, make, tests, "type2")


def run_experiment(grid: TrialGrid) -> ErrorTable:
    """Run whichever experiment the grid names."""
    if grid.experiment == "type1":
        return run_type1(grid)
    if grid.experiment == "gauss-student":
        return run_gauss_student(grid)
    return run_sinusoid_independence(grid)
