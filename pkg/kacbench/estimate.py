"""
Reproducible Monte Carlo estimation of integrals over sampled systems.

Samples are drawn in chunks of fixed size; chunk i of stream s is generated from
its own seed sequence (seed, spawn_key=(s, i)). Every chunk is reduced to
(count, mean, sum of squared deviations), and the chunk summaries are merged
in chunk order, so results are bit-identical for any number of worker threads.

Integrands map a batch of points to a float array. A NaN entry means that the
evaluation ran out of budget (abstained); such entries are counted, not averaged.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, List, Optional, Tuple

import numpy as np

from .config import conf
from .errors import ArgumentError, EstimationError
from .log import child
from .system import SampledSystem
from .util import Record

log = child(__name__)

Integrand = Callable[[np.ndarray], np.ndarray]
"""Vectorized function of points with values in [0, inf] (NaN = abstained)."""

Z95 = 1.96
"""Normal quantile of the reported 95% intervals."""

DEFAULT_SAMPLES = 100_000
"""Sample count of identity checks when none is given."""


class Estimate(Record):
    """Result of a Monte Carlo integration."""

    mean: float
    stderr: float
    """Sample standard deviation (ddof=1) divided by the square root of n_samples."""

    n_samples: int
    """Number of evaluations that entered the mean."""

    n_abstained: int = 0
    """Number of evaluations that ran out of budget."""

    ci95_low: float
    ci95_high: float

    @classmethod
    def from_moments(
        cls, count: int, mean: float, m2: float, n_abstained: int = 0
    ) -> Estimate:
        if count < 2:
            raise ArgumentError("an estimate needs at least two evaluations")
        if math.isinf(mean):
            stderr = math.inf
        else:
            stderr = math.sqrt(m2 / (count - 1)) / math.sqrt(count)
        return cls(
            mean=mean,
            stderr=stderr,
            n_samples=count,
            n_abstained=n_abstained,
            ci95_low=mean - Z95 * stderr,
            ci95_high=mean + Z95 * stderr,
        )

    @property
    def abstain_fraction(self) -> float:
        return self.n_abstained / (self.n_samples + self.n_abstained)

    def band(self, sigmas: Optional[float] = None) -> Tuple[float, float]:
        """Acceptance band mean +- sigmas * stderr (default width from the settings)."""
        k = conf().kacbench.confidence_sigmas if sigmas is None else sigmas
        return (self.mean - k * self.stderr, self.mean + k * self.stderr)

    def accepts(self, value: float, sigmas: Optional[float] = None) -> bool:
        """Whether an exact value lies inside the acceptance band."""
        lo, hi = self.band(sigmas)
        return lo <= value <= hi

    def overlaps(self, other: Estimate, sigmas: Optional[float] = None) -> bool:
        """Whether the acceptance bands of two estimates intersect."""
        lo1, hi1 = self.band(sigmas)
        lo2, hi2 = other.band(sigmas)
        return max(lo1, lo2) <= min(hi1, hi2)


Moments = Tuple[int, float, float, int, bool]
"""Chunk summary: (count, mean, squared deviations, abstained, has_inf)."""


def _moments(values: np.ndarray) -> Moments:
    values = np.asarray(values, dtype=np.float64)
    nan = np.isnan(values)
    valid = values[~nan]
    if np.isinf(valid).any():
        return (len(valid), math.inf, 0.0, int(nan.sum()), True)
    if len(valid) == 0:
        return (0, 0.0, 0.0, int(nan.sum()), False)
    mean = float(valid.mean())
    m2 = float(((valid - mean) ** 2).sum())
    return (len(valid), mean, m2, int(nan.sum()), False)


def _merge(a: Moments, b: Moments) -> Moments:
    """Combine two chunk summaries (pairwise update of mean and squared deviations)."""
    na, ma, m2a, abst_a, inf_a = a
    nb, mb, m2b, abst_b, inf_b = b
    n = na + nb
    if inf_a or inf_b:
        return (n, math.inf, 0.0, abst_a + abst_b, True)
    if n == 0:
        return (0, 0.0, 0.0, abst_a + abst_b, False)
    delta = mb - ma
    mean = ma + delta * nb / n
    m2 = m2a + m2b + delta * delta * na * nb / n
    return (n, mean, m2, abst_a + abst_b, False)


def mc_estimate(
    ss: SampledSystem,
    integrand: Integrand,
    n: int,
    seed: Optional[int] = None,
    *,
    stream: int = 0,
    chunk_size: Optional[int] = None,
    workers: Optional[int] = None,
    max_abstain_fraction: Optional[float] = None,
) -> Estimate:
    """
    Estimate the integral of `integrand` over the invariant measure of `ss`.

    The result only depends on (seed, stream, n, chunk_size), where `seed`
    defaults to the seed of the system. Raises `EstimationError` if more than
    `max_abstain_fraction` of the evaluations abstained.
    """
    if n < 2:
        raise ArgumentError(f"need at least 2 samples, got {n}")
    settings = conf().kacbench
    chunk_size = chunk_size or settings.chunk_size
    workers = workers or settings.workers
    threshold = (
        settings.max_abstain_fraction
        if max_abstain_fraction is None
        else max_abstain_fraction
    )
    if seed is not None and seed != ss.seed:
        ss = ss.with_seed(seed)

    n_chunks = (n + chunk_size - 1) // chunk_size

    def run_chunk(i: int) -> Moments:
        size = min(chunk_size, n - i * chunk_size)
        points = ss.sample(stream, size, chunk=i)
        return _moments(integrand(points))

    if workers > 1 and n_chunks > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            chunks: List[Moments] = list(pool.map(run_chunk, range(n_chunks)))
    else:
        chunks = [run_chunk(i) for i in range(n_chunks)]

    total: Moments = (0, 0.0, 0.0, 0, False)
    for m in chunks:
        total = _merge(total, m)
    count, mean, m2, abstained, _ = total

    fraction = abstained / n
    if fraction > threshold:
        msg = (
            f"{abstained} of {n} evaluations ran out of budget "
            f"({fraction:.4%} > {threshold:.4%}), the integral cannot be certified"
        )
        raise EstimationError(msg, fraction, threshold)
    if abstained:
        log.warning(f"{abstained} of {n} evaluations abstained (within tolerance)")
    if count < 2:
        raise EstimationError("fewer than two evaluations succeeded", fraction, threshold)

    ret = Estimate.from_moments(count, mean, m2, abstained)
    log.debug(
        f"estimate over {ss.kind.value} (seed {ss.seed}, stream {stream}): "
        f"{ret.mean} +- {ret.stderr} from {count} samples in {n_chunks} chunks"
    )
    return ret
