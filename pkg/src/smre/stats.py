"""Multiresolution residual statistics and their Monte-Carlo calibration.

The residual sum of squares over a pixel subset, divided by the noise
variance, is chi-square distributed under pure noise.  Its fourth root
is close to normal with known moments, which makes the maximum over a
multiscale system a balanced extreme-value statistic.  Quantiles of
that maximum are estimated by simulation and converted into per-set
constraint weights.
"""
from __future__ import annotations

import os
from dataclasses import dataclass, field

import numpy as np

from .grid import SubsetSystem, SummedAreaTable, as_field

__all__ = [
    "NoiseModel",
    "QuantileRecord",
    "fourth_root_moments",
    "mr_statistic",
    "transformed_statistic",
    "simulate_quantile",
    "assign_weights",
    "diagnose_violations",
    "load_quantile_cache",
    "lookup_quantile",
    "append_quantile",
]


@dataclass(frozen=True)
class NoiseModel:
    """Observation noise: Gaussian with known variance, or Poisson counts."""

    kind: str  # "gaussian" | "poisson"
    sigma2: float | None = None

    def __post_init__(self):
        if self.kind not in ("gaussian", "poisson"):
            raise ValueError(f"unknown noise kind {self.kind!r}")
        if self.kind == "gaussian":
            if self.sigma2 is None or self.sigma2 <= 0:
                raise ValueError("gaussian noise requires sigma2 > 0")
        elif self.sigma2 is not None:
            raise ValueError("poisson noise takes no sigma2")


@dataclass(frozen=True)
class QuantileRecord:
    """A persisted calibration result for one (grid, system, alpha, trials, seed)."""

    m: int
    n: int
    system_id: str
    alpha: float
    trials: int
    seed: int
    q_alpha: float
    generator: str = ""

    def __post_init__(self):
        if not (0.0 < self.alpha < 1.0):
            raise ValueError("alpha must lie in (0, 1)")
        if self.trials < 1:
            raise ValueError("trials must be >= 1")


def fourth_root_moments(card) -> tuple[float, float]:
    """Normal-approximation mean and std of the fourth root of a chi-square
    sum with `card` degrees of freedom: ((card - 0.5)^(1/4), (8 sqrt(card))^(-1/2))."""
    c = float(card)
    if c < 1:
        raise ValueError(f"cardinality must be >= 1, got {card}")
    return (c - 0.5) ** 0.25, (8.0 * np.sqrt(c)) ** -0.5


def _per_set_sums(v2: np.ndarray, sys: SubsetSystem) -> np.ndarray:
    sat = SummedAreaTable(v2)
    return sat.gather_flat(sys.flat_corner_idx())


def mr_statistic(v, sys: SubsetSystem, sigma2: float) -> float:
    """max over sets of (c_S / sigma^2) * sum of squared residuals on S."""
    v = as_field(v, "residual")
    if not sys.calibrated:
        raise RuntimeError("system is not calibrated (no weights assigned)")
    if sigma2 <= 0:
        raise ValueError("sigma2 must be positive")
    if v.shape != (sys.m, sys.n):
        raise ValueError(f"field shape {v.shape} does not match system grid")
    sums = _per_set_sums(v * v, sys)
    return float(np.max(sys.weights * sums) / sigma2)


def transformed_statistic(v, sys: SubsetSystem, sigma2: float) -> float:
    """Extreme-value form: max over sets of (t_S^(1/4) - mu_S) / sigma_S,
    with t_S the sigma^2-normalized squared residual sum over S."""
    v = as_field(v, "residual")
    if sigma2 <= 0:
        raise ValueError("sigma2 must be positive")
    if v.shape != (sys.m, sys.n):
        raise ValueError(f"field shape {v.shape} does not match system grid")
    sums = _per_set_sums(v * v, sys) / sigma2
    # round-off in the SAT can leave tiny negative sums for zero residuals
    np.maximum(sums, 0.0, out=sums)
    return float(np.max((np.power(sums, 0.25) - sys.mu) / sys.sigma))


_GENERATOR_TAG = f"numpy-PCG64-{np.__version__}"


def _trial_rng(seed: int, trial: int) -> np.random.Generator:
    return np.random.Generator(
        np.random.PCG64(np.random.SeedSequence(entropy=seed, spawn_key=(trial,))))


def simulate_quantile(m: int, n: int, sys: SubsetSystem, alpha: float,
                      trials: int = 5000, seed: int = 0) -> QuantileRecord:
    """Empirical alpha-quantile of the transformed statistic under pure
    standard-normal noise.

    The statistic is scale-free when the noise variance matches the
    normalization, so unit variance serves every sigma.  The quantile is
    the ceil(alpha * trials)-th smallest sample; per-trial substreams are
    derived from (seed, trial index) so results do not depend on
    evaluation order.
    """
    if not (0.0 < alpha < 1.0):
        raise ValueError("alpha must lie in (0, 1)")
    if trials < 1:
        raise ValueError("trials must be >= 1")
    if (sys.m, sys.n) != (int(m), int(n)):
        raise ValueError("system grid does not match requested dimensions")
    values = simulate_statistic_sample(m, n, sys, trials, seed)
    q = empirical_quantile(values, alpha)
    return QuantileRecord(int(m), int(n), sys.system_id, float(alpha),
                          int(trials), int(seed), q, generator=_GENERATOR_TAG)


def simulate_statistic_sample(m: int, n: int, sys: SubsetSystem,
                              trials: int, seed: int) -> np.ndarray:
    """The raw sorted Monte-Carlo sample behind simulate_quantile."""
    idx = sys.flat_corner_idx()
    mu, sigma = sys.mu, sys.sigma
    values = np.empty(trials)
    for t in range(trials):
        eps = _trial_rng(seed, t).standard_normal((int(m), int(n)))
        sums = SummedAreaTable(eps * eps).gather_flat(idx)
        np.maximum(sums, 0.0, out=sums)
        values[t] = np.max((np.power(sums, 0.25) - mu) / sigma)
    values.sort()
    return values


def empirical_quantile(sorted_values: np.ndarray, alpha: float) -> float:
    """Lower empirical quantile: the ceil(alpha * n)-th order statistic."""
    k = int(np.ceil(alpha * sorted_values.size))
    return float(sorted_values[max(k, 1) - 1])


def assign_weights(sys: SubsetSystem, q: QuantileRecord) -> SubsetSystem:
    """Return a calibrated copy of the system with per-set weights
    (q_alpha * sigma_S + mu_S)^(-4)."""
    if (q.m, q.n) != (sys.m, sys.n) or q.system_id != sys.system_id:
        raise ValueError(f"quantile record keyed to ({q.m}x{q.n}, {q.system_id!r}) "
                         f"does not match system ({sys.m}x{sys.n}, {sys.system_id!r})")
    base = q.q_alpha * sys.sigma + sys.mu
    if np.any(base <= 0):
        raise ValueError("q_alpha is too negative: weight base must stay positive")
    return sys.with_weights(np.power(base, -4.0), q.q_alpha, q.alpha)


def diagnose_violations(residual, sys: SubsetSystem, sigma2: float,
                        scale_filter: int | None = None) -> np.ndarray:
    """Binary mask marking the union of sets whose weighted residual sum
    exceeds 1, optionally restricted to sets of one cardinality."""
    residual = as_field(residual, "residual")
    if not sys.calibrated:
        raise RuntimeError("system is not calibrated (no weights assigned)")
    sums = _per_set_sums(residual * residual, sys)
    violated = (sys.weights * sums) / sigma2 > 1.0
    if scale_filter is not None:
        violated &= sys.cards == int(scale_filter)
    mask = np.zeros((sys.m, sys.n))
    for i in np.flatnonzero(violated):
        t, l = sys.tops[i], sys.lefts[i]
        mask[t:t + sys.heights[i], l:l + sys.widths[i]] = 1.0
    return mask


# ---------------------------------------------------------------------------
# Quantile cache file: append-only ASCII lines
#   SMRE-Q v1 | m n | system_id | alpha | trials | seed | q_alpha(hex float)
# The lookup key is the first five fields.
# ---------------------------------------------------------------------------

def _record_line(rec: QuantileRecord) -> str:
    return (f"SMRE-Q v1 | {rec.m} {rec.n} | {rec.system_id} | {rec.alpha!r} | "
            f"{rec.trials} | {rec.seed} | {rec.q_alpha.hex()}\n")


def _parse_line(line: str) -> QuantileRecord | None:
    parts = [p.strip() for p in line.split("|")]
    if len(parts) != 7 or parts[0] != "SMRE-Q v1":
        return None
    dims = parts[1].split()
    return QuantileRecord(int(dims[0]), int(dims[1]), parts[2], float(parts[3]),
                          int(parts[4]), int(parts[5]), float.fromhex(parts[6]))


def load_quantile_cache(path) -> list[QuantileRecord]:
    if not os.path.exists(path):
        return []
    records = []
    with open(path, "r", encoding="ascii") as fh:
        for line in fh:
            if line.strip():
                rec = _parse_line(line)
                if rec is None:
                    raise ValueError(f"malformed quantile cache line: {line!r}")
                records.append(rec)
    return records


def lookup_quantile(path, m: int, n: int, system_id: str, alpha: float,
                    trials: int) -> QuantileRecord | None:
    """First cached record matching the five key fields, or None."""
    for rec in load_quantile_cache(path):
        if (rec.m, rec.n, rec.system_id, rec.alpha, rec.trials) == \
                (int(m), int(n), system_id, float(alpha), int(trials)):
            return rec
    return None


def append_quantile(path, rec: QuantileRecord) -> None:
    """Append a record via atomic write-rename of the whole file."""
    records = load_quantile_cache(path)
    tmp = f"{path}.tmp.{os.getpid()}"
    with open(tmp, "w", encoding="ascii") as fh:
        for r in records:
            fh.write(_record_line(r))
        fh.write(_record_line(rec))
    os.replace(tmp, path)
