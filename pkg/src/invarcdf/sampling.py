"""Nomination-sampling data generation and reference curves."""

from dataclasses import dataclass

import numpy as np

from .estimator import StepEstimator, WeightVector, fit
from .model import Transform, psi_eval
from .risk import Sampler, _uniforms

__all__ = ["NominationScheme", "generate", "nominated_cdf", "true_tau_curve", "empirical_cdf"]


@dataclass(frozen=True)
class NominationScheme:
    """Observe one fixed order statistic (max, min, or median) of each of n sets of size k."""

    kind: str
    k: int
    n: int

    def __post_init__(self):
        if self.kind not in ("maxima", "minima", "median"):
            raise ValueError(f"unknown nomination kind {self.kind!r}")
        if self.k < 1:
            raise ValueError("set size k must be >= 1")
        if self.kind == "median" and self.k % 2 == 0:
            raise ValueError("median nomination requires odd set size")
        if self.n < 2:
            raise ValueError("need at least n = 2 sets")

    @property
    def recovery_transform(self):
        """The tau that maps the nominated-data cdf back to the base cdf."""
        if self.kind == "maxima":
            return Transform(kind="power", m=1.0 / self.k)
        if self.kind == "minima":
            return Transform(kind="minima", k=self.k)
        return Transform(kind="median_nom", k=self.k)


def generate(scheme, sampler, seed=0):
    """Draw n nominated observations: per set, k inverse-cdf draws reduced by the scheme."""
    draws = sampler.ppf(_uniforms(scheme.n, scheme.k, seed))
    if scheme.kind == "maxima":
        return np.max(draws, axis=1)
    if scheme.kind == "minima":
        return np.min(draws, axis=1)
    return np.partition(draws, scheme.k // 2, axis=1)[:, scheme.k // 2]


def nominated_cdf(scheme, base_cdf_values):
    """Cdf of a nominated observation given base-cdf values F(t)."""
    F = np.asarray(base_cdf_values, dtype=float)
    if scheme.kind == "maxima":
        return F**scheme.k
    if scheme.kind == "minima":
        return 1.0 - (1.0 - F) ** scheme.k
    return psi_eval(scheme.k, F)


def true_tau_curve(scheme, base_cdf, grid):
    """(t, tau(F_nom(t))) pairs; tau undoes the scheme, so the curve is the base cdf."""
    grid = np.asarray(grid, dtype=float)
    F_nom = nominated_cdf(scheme, base_cdf(grid))
    tau = scheme.recovery_transform
    return list(zip(grid.tolist(), np.asarray(tau.eval(F_nom)).tolist()))


def empirical_cdf(data):
    """Empirical distribution function as a StepEstimator: levels i/n, tail 1."""
    data = np.asarray(data, dtype=float)
    n = len(data)
    if n < 1:
        raise ValueError("need at least one observation")
    v = WeightVector.from_array(np.arange(n + 1) / n)
    return fit(data, v, tail=1.0)
