"""
Repeated trials with a Student-t confidence interval stopping rule
"""

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
import logging
import math
from typing import Optional, Sequence

import numpy as np
from scipy.stats import t

from .config import ScenarioConfig
from .sim import TrialMetrics, run_trial

logger = logging.getLogger(__name__)

# delivery ratio means above this use an absolute half width
ABSOLUTE_BELOW_ONE = 0.99


@dataclass(frozen=True)
class ConfidenceInterval:
    mean: float
    half_width: float
    n: int

    @property
    def low(self) -> float:
        return self.mean - self.half_width

    @property
    def high(self) -> float:
        return self.mean + self.half_width


def t_interval(samples: Sequence[float], confidence: float = 0.95) -> ConfidenceInterval:
    """
    Student-t interval of the sample mean
    :param samples: observations
    :param confidence: two sided confidence level
    :return: ConfidenceInterval, infinite half width for fewer than two samples
    """
    values = np.asarray(samples, dtype=float)
    n = len(values)
    if n == 0:
        return ConfidenceInterval(mean=math.nan, half_width=math.inf, n=0)
    mean = float(np.mean(values))
    if n < 2:
        return ConfidenceInterval(mean=mean, half_width=math.inf, n=n)
    std = float(np.std(values, ddof=1))
    half_width = float(t.ppf(0.5 + confidence / 2.0, n - 1)) * std / math.sqrt(n)
    return ConfidenceInterval(mean=mean, half_width=half_width, n=n)


def within_target(interval: ConfidenceInterval, target: float, absolute_above: Optional[float] = None) -> bool:
    """
    Relative half width test, absolute once the mean passes absolute_above
    """
    if absolute_above is not None and interval.mean > absolute_above:
        return interval.half_width <= target
    return interval.half_width <= target * abs(interval.mean)


@dataclass(frozen=True)
class AggregateMetrics:
    """
    Means over the trials of one configuration, seeds seed_base .. seed_base + trials - 1
    """

    config_name: str
    seed_base: int
    trials: int
    transmissions: ConfidenceInterval
    delivery_ratio: ConfidenceInterval
    retransmissions: float
    retransmit_fraction: float
    node_count: float
    control_packets: float
    control_bytes: float
    overhead_bytes: float
    broadcast_latency: float
    min_delivery: float
    max_delivery: float
    truncated_trials: int
    converged: bool


def aggregate(config: ScenarioConfig, results: Sequence[TrialMetrics], converged: bool, confidence: float = 0.95) -> AggregateMetrics:
    def mean_of(attr: str) -> float:
        return float(np.mean([getattr(r, attr) for r in results]))

    delivery = [r.delivery_ratio for r in results]
    return AggregateMetrics(
        config_name=config.name,
        seed_base=config.seed_base,
        trials=len(results),
        transmissions=t_interval([r.transmissions for r in results], confidence),
        delivery_ratio=t_interval(delivery, confidence),
        retransmissions=mean_of("retransmissions"),
        retransmit_fraction=mean_of("retransmit_fraction"),
        node_count=mean_of("node_count"),
        control_packets=mean_of("control_packets"),
        control_bytes=mean_of("control_bytes"),
        overhead_bytes=mean_of("overhead_bytes"),
        broadcast_latency=mean_of("broadcast_latency"),
        min_delivery=float(min(delivery)),
        max_delivery=float(max(delivery)),
        truncated_trials=sum(1 for r in results if r.truncated),
        converged=converged,
    )


def _run_seed(args: tuple[ScenarioConfig, int]) -> TrialMetrics:
    config, seed = args
    return run_trial(config, seed)


def run_until_ci(
    config: ScenarioConfig,
    target: Optional[float] = None,
    confidence: Optional[float] = None,
    min_trials: Optional[int] = None,
    max_trials: Optional[int] = None,
    jobs: int = 1,
) -> AggregateMetrics:
    """
    Run trials with seeds seed_base, seed_base + 1, ... until both the mean
    transmission count and the mean delivery ratio are known to the target
    half width. Arguments left as None come from config.ci.
    The stopping rule is evaluated trial by trial in seed order, so the result
    does not depend on jobs.
    :param config: scenario
    :param target: relative half width, absolute for delivery above 0.99
    :param confidence: confidence level
    :param min_trials: trials run before the rule is checked
    :param max_trials: give up and flag the result as not converged
    :param jobs: worker processes
    :return: AggregateMetrics
    """
    target = config.ci.target if target is None else target
    confidence = config.ci.confidence if confidence is None else confidence
    min_trials = config.ci.min_trials if min_trials is None else min_trials
    max_trials = config.ci.max_trials if max_trials is None else max_trials
    min_trials = min(min_trials, max_trials)

    def done(results: list[TrialMetrics]) -> bool:
        if len(results) < min_trials:
            return False
        transmissions = t_interval([r.transmissions for r in results], confidence)
        delivery = t_interval([r.delivery_ratio for r in results], confidence)
        return within_target(transmissions, target) and within_target(
            delivery, target, absolute_above=ABSOLUTE_BELOW_ONE
        )

    results: list[TrialMetrics] = []
    converged = False
    executor = ProcessPoolExecutor(max_workers=jobs) if jobs > 1 else None
    try:
        while len(results) < max_trials and not converged:
            first = config.seed_base + len(results)
            batch = max(jobs, min_trials - len(results), 1)
            seeds = range(first, first + min(batch, max_trials - len(results)))
            if executor is None:
                batch_results = map(_run_seed, ((config, seed) for seed in seeds))
            else:
                batch_results = executor.map(_run_seed, [(config, seed) for seed in seeds])
            for metrics in batch_results:
                results.append(metrics)
                if done(results):
                    converged = True
                    break
    finally:
        if executor is not None:
            executor.shutdown(cancel_futures=True)

    if converged:
        logger.debug(f"{config.name} converged after {len(results)} trials")
    else:
        logger.warning(f"{config.name} did not converge in {max_trials} trials")
    return aggregate(config, results, converged, confidence)
