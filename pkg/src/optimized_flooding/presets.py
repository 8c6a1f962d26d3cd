"""
Named experiment presets. Each expands deterministically into a list of
scenario configurations, in the row order of the result CSV.
"""

from dataclasses import dataclass, field, replace
import logging
from typing import Callable, Optional

from .config import CiPolicy, Placement, ProtocolSpec, ScenarioConfig
from .exceptions import UnknownPreset
from .geometry import Region
from .mobility import MobilityKind, MobilityModel
from .protocol import DEFAULT_RANGE
from .radio import RadioModel

logger = logging.getLogger(__name__)

R = DEFAULT_RANGE

# ideal case: (circle radius in R, published retransmissions)
IDEAL_CIRCLES = ((2, 12), (3, 24), (4, 42), (5, 60), (6, 90), (7, 126), (8, 168))
# (width in R, height in R, retransmissions), long side along x
IDEAL_RECTANGLES = (
    (3, 3, 8),
    (4, 4, 10),
    (5, 5, 16),
    (6, 6, 26),
    (8, 8, 42),
    (10, 10, 74),
    (6, 4, 18),
    (8, 6, 36),
    (10, 8, 54),
)

OFP = ProtocolSpec(name="ofp")
AHBP = ProtocolSpec(name="ahbp")


@dataclass(frozen=True)
class ExperimentPreset:
    """
    A sweep and the published values it is compared against.
    reference maps config name to expected values, notes go to the manifest.
    """

    name: str
    caption: str
    configs: tuple[ScenarioConfig, ...]
    reference: dict[str, dict[str, float]] = field(default_factory=dict)
    notes: tuple[str, ...] = ()


def _square(side: float) -> Region:
    return Region.rectangle(side, side)


def _scenario(name: str, region: Region, **kwargs) -> ScenarioConfig:
    return ScenarioConfig(name=name, region=region, R=R, seed_base=1, **kwargs)


def _ideal_case() -> ExperimentPreset:
    configs, reference = [], {}
    deterministic = CiPolicy(min_trials=2, max_trials=2)
    for radius, expected in IDEAL_CIRCLES:
        name = f"ideal_case/circle/{radius}R"
        configs.append(
            _scenario(name, Region.circle(radius * R), density=None, placement=Placement.IDEAL, protocol=OFP, ci=deterministic)
        )
        reference[name] = {"retransmissions": expected}
    for width, height, expected in IDEAL_RECTANGLES:
        name = f"ideal_case/rectangle/{height}Rx{width}R"
        configs.append(
            _scenario(
                name,
                Region.rectangle(width * R, height * R),
                density=None,
                placement=Placement.IDEAL,
                protocol=OFP,
                ci=deterministic,
            )
        )
        reference[name] = {"retransmissions": expected}
    return ExperimentPreset(
        name="ideal_case",
        caption="Transmissions to cover circular and rectangular regions with a node on every strategic location",
        configs=tuple(configs),
        reference=reference,
        notes=(
            "retransmissions exclude the source",
            "circles keep lattice vertices on the boundary, rectangles drop vertices on an edge",
        ),
    )


def _threshold_sweep() -> ExperimentPreset:
    configs = []
    for side in (1800.0, 1200.0):
        for th in (0.35, 0.40, 0.45):
            for density in (4.0, 9.0, 16.0, 25.0, 36.0, 64.0, 100.0):
                configs.append(
                    _scenario(
                        f"threshold_sweep/{side:g}/th{th:.2f}/d{density:g}",
                        _square(side),
                        density=density,
                        protocol=replace(OFP, th_fraction=th),
                    )
                )
    return ExperimentPreset(
        name="threshold_sweep",
        caption="Delivery ratio and transmissions for thresholds 0.35, 0.40 and 0.45 on 1800m X 1800m and 1200m X 1200m",
        configs=tuple(configs),
    )


def _density_sweep() -> ExperimentPreset:
    configs = []
    regions = [(f"{s:g}x{s:g}", _square(s)) for s in (900.0, 1200.0, 1800.0, 2400.0, 3000.0)]
    regions.append(("1800x2400", Region.rectangle(2400.0, 1800.0)))
    for label, region in regions:
        for density in (4.0, 6.25, 9.0, 16.0, 25.0, 36.0, 49.0, 64.0, 100.0):
            configs.append(_scenario(f"density_sweep/{label}/d{density:g}", region, density=density, protocol=OFP))
    return ExperimentPreset(
        name="density_sweep",
        caption="Transmissions to cover regions from 900m X 900m to 3000m X 3000m, densities 4 to 100",
        configs=tuple(configs),
    )


def _retransmit_fraction() -> ExperimentPreset:
    configs = []
    for side in (1200.0, 1800.0, 2400.0, 3000.0):
        for density in (4.0, 9.0, 16.0, 36.0, 64.0, 100.0):
            configs.append(
                _scenario(f"retransmit_fraction/{side:g}/d{density:g}", _square(side), density=density, protocol=OFP)
            )
    return ExperimentPreset(
        name="retransmit_fraction",
        caption="Percentage of retransmitting nodes for different networks",
        configs=tuple(configs),
    )


def _static_compare() -> ExperimentPreset:
    configs = []
    for side in (1200.0, 1800.0, 2400.0):
        for density in (4.0, 6.25, 9.0, 16.0, 25.0):
            for spec in (OFP, AHBP):
                configs.append(
                    _scenario(f"static_compare/{side:g}/d{density:g}/{spec.name}", _square(side), density=density, protocol=spec)
                )
    return ExperimentPreset(
        name="static_compare",
        caption="Performance of OFP and AHBP in static networks",
        configs=tuple(configs),
    )


def _mobility_sweep() -> ExperimentPreset:
    configs = []
    protocols = [("ofp", OFP), ("ahbp-h10", AHBP), ("ahbp-h5", replace(AHBP, hello_interval=5.0))]
    for speed in (1.0, 5.0, 10.0, 15.0, 20.0):
        mobility = MobilityModel(kind=MobilityKind.RANDOM_WALK, mean_speed=speed)
        for label, spec in protocols:
            configs.append(
                _scenario(
                    f"mobility_sweep/v{speed:g}/{label}",
                    _square(1800.0),
                    density=None,
                    node_count=144,
                    protocol=spec,
                    mobility=mobility,
                )
            )
    return ExperimentPreset(
        name="mobility_sweep",
        caption="Effect of Mobility on different protocols. Network size = 1800m X 1800m. Number of nodes =144.",
        configs=tuple(configs),
        notes=(
            "the text describes this study on 2400m X 2400m while the caption gives 1800m X 1800m; "
            "1800m X 1800m is used, matching density 4 of the other 144 node studies",
        ),
    )


def _error_sweep() -> ExperimentPreset:
    configs = []
    for step in range(7):
        error_rate = round(0.05 * step, 2)
        for spec in (OFP, AHBP):
            configs.append(
                _scenario(
                    f"error_sweep/e{error_rate:.2f}/{spec.name}",
                    _square(1800.0),
                    density=None,
                    node_count=144,
                    protocol=spec,
                    radio=RadioModel(R=R, error_rate=error_rate),
                )
            )
    return ExperimentPreset(
        name="error_sweep",
        caption="Performance comparison of OFP and AHBP in presence Transmission errors. Network size = 1800m X 1800m. Number of nodes =144.",
        configs=tuple(configs),
    )


def _distortion_sweep() -> ExperimentPreset:
    configs = []
    distortions = (0.0, 0.1, 0.2, 0.3, 0.4, 0.5)
    for density in (4.0, 6.25, 16.0):
        for distortion in distortions:
            configs.append(
                _scenario(
                    f"distortion_sweep/1800/d{density:g}/x{distortion:.1f}/ofp",
                    _square(1800.0),
                    density=density,
                    protocol=OFP,
                    radio=RadioModel(R=R, distortion=distortion),
                )
            )
    for side in (1800.0, 2400.0):
        for distortion in distortions:
            configs.append(
                _scenario(
                    f"distortion_sweep/{side:g}/d6.25/x{distortion:.1f}/ahbp",
                    _square(side),
                    density=6.25,
                    protocol=AHBP,
                    radio=RadioModel(R=R, distortion=distortion),
                )
            )
            if side != 1800.0:
                configs.append(
                    _scenario(
                        f"distortion_sweep/{side:g}/d6.25/x{distortion:.1f}/ofp",
                        _square(side),
                        density=6.25,
                        protocol=OFP,
                        radio=RadioModel(R=R, distortion=distortion),
                    )
                )
    return ExperimentPreset(
        name="distortion_sweep",
        caption="Effect of non-uniform propagation on OFP, and OFP against AHBP at density 6.25. Network size is 1800m X 1800m",
        configs=tuple(configs),
        notes=("distortion d draws every sector range from [(1 - d) * R, R]",),
    )


def _baseline_compare() -> ExperimentPreset:
    configs = []
    protocols = (
        ProtocolSpec(name="flood"),
        ProtocolSpec(name="gossip"),
        ProtocolSpec(name="counter"),
        ProtocolSpec(name="distance"),
        OFP,
        AHBP,
    )
    for density in (4.0, 16.0):
        for spec in protocols:
            configs.append(
                _scenario(f"baseline_compare/1800/d{density:g}/{spec.name}", _square(1800.0), density=density, protocol=spec)
            )
    return ExperimentPreset(
        name="baseline_compare",
        caption="Flooding, gossip, counter, distance, OFP and AHBP-style on 1800m X 1800m",
        configs=tuple(configs),
    )


_PRESETS: dict[str, Callable[[], ExperimentPreset]] = {
    "ideal_case": _ideal_case,
    "threshold_sweep": _threshold_sweep,
    "density_sweep": _density_sweep,
    "retransmit_fraction": _retransmit_fraction,
    "static_compare": _static_compare,
    "mobility_sweep": _mobility_sweep,
    "error_sweep": _error_sweep,
    "distortion_sweep": _distortion_sweep,
    "baseline_compare": _baseline_compare,
}


def list_presets() -> list[str]:
    return list(_PRESETS)


def get_preset(name: str) -> ExperimentPreset:
    """
    :raises UnknownPreset: listing the known names
    """
    try:
        builder = _PRESETS[name]
    except KeyError:
        raise UnknownPreset(name, list_presets())
    return builder()


def preset(name: str) -> list[ScenarioConfig]:
    """
    Configurations of a named preset
    """
    return list(get_preset(name).configs)


def is_preset(name: Optional[str]) -> bool:
    return name in _PRESETS
