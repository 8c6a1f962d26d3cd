"""
Long statistical studies. Run with ``pytest -m acceptance``.
"""

from dataclasses import replace
import logging

import pytest

from optimized_flooding import Region, ScenarioConfig, preset, run_trial, run_until_ci
from optimized_flooding.config import CiPolicy, Placement, ProtocolSpec
from optimized_flooding.geometry import RegionShape
from optimized_flooding.presets import get_preset
from optimized_flooding.sim import place_lattice

logger = logging.getLogger("test")

pytestmark = [pytest.mark.acceptance, pytest.mark.timeout(3600)]

# circles whose lattice size matches the published count
MATCHING_CIRCLES = {"2R", "3R", "4R", "5R", "7R"}
CONVERGED = CiPolicy(target=0.05, min_trials=10, max_trials=60)


def converged(config: ScenarioConfig):
    return run_until_ci(replace(config, ci=CONVERGED), jobs=4)


def ideal_counts() -> dict[str, tuple[int, float]]:
    experiment = get_preset("ideal_case")
    counts = {}
    for config in experiment.configs:
        metrics = run_trial(config, config.seed_base)
        counts[config.name] = (metrics.retransmissions, experiment.reference[config.name]["retransmissions"])
    return counts


def test_ideal_case_every_node_transmits_once():
    experiment = get_preset("ideal_case")
    for config in experiment.configs:
        metrics = run_trial(config, config.seed_base)
        lattice = place_lattice(config.region, config.R, margin=config.lattice_margin)
        logger.info(f"{config.name}: {metrics.retransmissions} retransmissions")
        # lattice nodes are at least R apart, so nobody is suppressed
        assert metrics.transmissions == metrics.delivered
        if config.region.shape is RegionShape.CIRCLE:
            assert metrics.retransmissions == len(lattice.nodes) - 1
        if config.name.rsplit("/", 1)[-1] in MATCHING_CIRCLES:
            assert metrics.retransmissions == experiment.reference[config.name]["retransmissions"]


def test_ideal_case_published_counts():
    for name, (count, published) in ideal_counts().items():
        logger.info(f"{name}: {count} against {published:g}")
        if name.endswith("/3Rx3R"):
            continue
        assert abs(count - published) <= 0.15 * published, name


@pytest.mark.xfail(
    strict=True,
    reason="the centred square holds 6 relays; growing it adds the four vertices at (+-R, +-sqrt(3) R) "
    "before the pair at (+-2R, 0), so the count goes 6, 10, 12 and never 8",
)
def test_ideal_three_range_square_published_count():
    count, published = ideal_counts()["ideal_case/rectangle/3Rx3R"]
    assert count == published == 8


@pytest.mark.parametrize("density", [16.0, 36.0])
def test_dense_delivery_and_savings(density):
    ofp = ScenarioConfig(name=f"ofp/d{density:g}", region=Region.rectangle(1200.0, 1200.0), density=density, ci=CONVERGED)
    flood = replace(ofp, name=f"flood/d{density:g}", protocol=ProtocolSpec(name="flood"))
    ofp_summary, flood_summary = run_until_ci(ofp, jobs=4), run_until_ci(flood, jobs=4)
    logger.info(
        f"d{density:g}: ofp {ofp_summary.transmissions.mean:.1f} tx delivery {ofp_summary.delivery_ratio.mean:.3f}, "
        f"flood {flood_summary.transmissions.mean:.1f} tx"
    )
    assert ofp_summary.delivery_ratio.mean > 0.95
    assert ofp_summary.transmissions.mean < 0.5 * flood_summary.transmissions.mean


def test_transmissions_grow_with_threshold_drop():
    # a lower threshold suppresses fewer nodes
    results = {}
    for config in preset("threshold_sweep"):
        if config.region.width == 1200.0 and config.density == 25.0:
            results[config.protocol.th_fraction] = run_until_ci(replace(config, ci=CiPolicy(max_trials=40)), jobs=4)
    assert results[0.35].transmissions.mean > results[0.45].transmissions.mean


@pytest.mark.xfail(
    strict=False,
    reason="measured delivery stays at 1.00 for thresholds 0.35, 0.40 and 0.45 at densities >= 16",
)
def test_threshold_delivery_tradeoff():
    delivery: dict[float, list[float]] = {0.35: [], 0.40: [], 0.45: []}
    for config in preset("threshold_sweep"):
        if config.region.width == 1800.0 and config.density >= 16.0:
            delivery[config.protocol.th_fraction].append(converged(config).delivery_ratio.mean)
    logger.info(f"delivery by threshold: {delivery}")
    for low, mid, high in zip(delivery[0.35], delivery[0.40], delivery[0.45]):
        assert low >= 0.96
        assert 0.92 <= mid <= 0.98
        assert high < mid < low


@pytest.mark.xfail(
    strict=False,
    reason="measured mean transmissions on 1800m x 1800m grow from about 46 at density 4 to about 59 at "
    "density 100, against 26 on the ideal lattice",
)
def test_density_approaches_ideal_count():
    region = Region.rectangle(1800.0, 1800.0)
    sparse = converged(ScenarioConfig(name="d4", region=region, density=4.0))
    dense = converged(ScenarioConfig(name="d100", region=region, density=100.0))
    ideal = run_trial(ScenarioConfig(name="ideal", region=region, density=None, placement=Placement.IDEAL), 1)
    logger.info(
        f"d4 {sparse.transmissions.mean:.1f}, d100 {dense.transmissions.mean:.1f}, ideal {ideal.transmissions}"
    )
    assert dense.transmissions.mean < sparse.transmissions.mean
    assert abs(dense.transmissions.mean - ideal.transmissions) <= 0.25 * ideal.transmissions


def test_delivery_floor_across_sizes_and_densities():
    worst = None
    for config in preset("density_sweep"):
        summary = run_until_ci(replace(config, ci=CiPolicy(target=0.05, min_trials=10, max_trials=20)), jobs=4)
        logger.info(f"{config.name}: delivery {summary.delivery_ratio.mean:.3f}")
        if worst is None or summary.delivery_ratio.mean < worst[1]:
            worst = (config.name, summary.delivery_ratio.mean)
    assert worst[1] >= 0.93, worst


def error_pair(error_rate: float):
    results = {}
    for config in preset("error_sweep"):
        if config.radio.error_rate == error_rate:
            results[config.protocol.name] = converged(config)
    return results["ofp"], results["ahbp"]


def test_ofp_delivery_under_errors():
    ofp, ahbp = error_pair(0.30)
    logger.info(f"30% error: ofp {ofp.delivery_ratio.mean:.3f}, ahbp {ahbp.delivery_ratio.mean:.3f}")
    assert ofp.delivery_ratio.mean >= 0.80


@pytest.mark.xfail(
    strict=False,
    reason="measured delivery at 30% error is about 0.93 for OFP and 0.92 for AHBP-style relaying",
)
def test_ofp_beats_ahbp_under_errors():
    ofp, ahbp = error_pair(0.30)
    assert ofp.delivery_ratio.mean >= ahbp.delivery_ratio.mean + 0.10


def test_mobility_robustness():
    delivery: dict[str, dict[float, float]] = {}
    for config in preset("mobility_sweep"):
        label = config.name.rsplit("/", 1)[-1]
        if label == "ahbp-h5":
            continue
        summary = converged(config)
        delivery.setdefault(label, {})[config.mobility.mean_speed] = summary.delivery_ratio.mean
    logger.info(f"delivery by speed: {delivery}")
    ofp = delivery["ofp"].values()
    assert max(ofp) - min(ofp) < 0.05
    assert delivery["ahbp-h10"][1.0] - delivery["ahbp-h10"][20.0] >= 0.10
