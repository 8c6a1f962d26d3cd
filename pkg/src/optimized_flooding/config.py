"""
Scenario configuration and its text format.

Files hold one ``key = value`` pair per line with dotted section names,
``#`` starts a comment::

    name = error_sweep/ofp/e0.30
    region.shape = rectangle
    region.width = 1800.0
    radio.error_rate = 0.3

parse_config(emit_config(c)) == c for every valid configuration.
"""

from dataclasses import dataclass, field, fields, replace
from enum import Enum
import logging
import math
from pathlib import Path
from typing import Any, Callable, Optional, Union

from .baselines import (
    DEFAULT_COUNTER_THRESHOLD,
    DEFAULT_GOSSIP_P,
    DEFAULT_HELLO_INTERVAL,
    AhbpProtocol,
    BaselineKind,
    BaselineParams,
    CounterProtocol,
    DistanceProtocol,
    FloodProtocol,
    GossipProtocol,
)
from .exceptions import ConfigError, OutOfRange
from .geometry import Point, Region, RegionShape
from .mobility import MobilityKind, MobilityModel
from .protocol import (
    DEFAULT_MAX_DELAY,
    DEFAULT_RANGE,
    DEFAULT_TH_FRACTION,
    BroadcastProtocol,
    OfpParams,
    OfpProtocol,
)
from .radio import RadioModel

logger = logging.getLogger(__name__)

PROTOCOL_NAMES = ("ofp", "flood", "gossip", "counter", "distance", "ahbp")

DEFAULT_TIME_CAP = 30.0


class Placement(Enum):
    UNIFORM = "uniform"
    IDEAL = "ideal"


@dataclass(frozen=True)
class ProtocolSpec:
    """
    Protocol name and every tunable of every protocol. Only the fields of the
    named protocol are used.
    """

    name: str = "ofp"
    th_fraction: float = DEFAULT_TH_FRACTION
    max_delay: float = DEFAULT_MAX_DELAY
    neighbor_count_discard: bool = False
    p: float = DEFAULT_GOSSIP_P
    counter_threshold: float = DEFAULT_COUNTER_THRESHOLD
    assess_delay: float = DEFAULT_MAX_DELAY
    distance_threshold: Optional[float] = None
    hello_interval: float = DEFAULT_HELLO_INTERVAL

    def __post_init__(self):
        if self.name not in PROTOCOL_NAMES:
            raise OutOfRange(f"Unknown protocol {self.name!r}, expected one of {', '.join(PROTOCOL_NAMES)}")

    def build(self, R: float) -> BroadcastProtocol:
        """
        Protocol instance for range R
        """
        if self.name == "ofp":
            return OfpProtocol(
                OfpParams(
                    R=R,
                    th_fraction=self.th_fraction,
                    max_delay=self.max_delay,
                    neighbor_count_discard=self.neighbor_count_discard,
                )
            )
        kind = BaselineKind(self.name)
        params = BaselineParams(
            kind=kind,
            R=R,
            p=self.p,
            counter_threshold=self.counter_threshold,
            assess_delay=self.assess_delay,
            distance_threshold=self.distance_threshold,
            hello_interval=self.hello_interval,
        )
        match kind:
            case BaselineKind.FLOOD:
                return FloodProtocol(R=R)
            case BaselineKind.GOSSIP:
                return GossipProtocol(params)
            case BaselineKind.COUNTER:
                return CounterProtocol(params)
            case BaselineKind.DISTANCE:
                return DistanceProtocol(params)
            case BaselineKind.AHBP:
                return AhbpProtocol(params)


@dataclass(frozen=True)
class CiPolicy:
    """
    Stopping rule of the trial loop. target is a relative half width, absolute
    for a delivery ratio mean above 0.99.
    """

    target: float = 0.05
    confidence: float = 0.95
    min_trials: int = 10
    max_trials: int = 1000

    def __post_init__(self):
        if not self.target > 0:
            raise OutOfRange(f"CI target must be > 0, got {self.target}")
        if not 0 < self.confidence < 1:
            raise OutOfRange(f"confidence must be in (0, 1), got {self.confidence}")
        if self.min_trials < 2:
            raise OutOfRange(f"min_trials must be >= 2, got {self.min_trials}")
        if self.max_trials < self.min_trials:
            raise OutOfRange(f"max_trials {self.max_trials} is below min_trials {self.min_trials}")


@dataclass(frozen=True)
class ScenarioConfig:
    """
    Everything one trial needs besides its seed.
    density is in nodes per R x R square, node_count overrides it.
    lattice_margin only applies to ideal placement. Ideal trials place the
    region interior only, margin 0, unlike ideal_lattice whose default is R.
    """

    name: str = "scenario"
    region: Region = field(default_factory=lambda: Region.rectangle(1200.0, 1200.0))
    R: float = DEFAULT_RANGE
    density: Optional[float] = 4.0
    node_count: Optional[int] = None
    placement: Placement = Placement.UNIFORM
    lattice_margin: float = 0.0
    protocol: ProtocolSpec = field(default_factory=ProtocolSpec)
    mobility: MobilityModel = field(default_factory=MobilityModel)
    radio: RadioModel = field(default_factory=RadioModel)
    seed_base: int = 0
    ci: CiPolicy = field(default_factory=CiPolicy)
    time_cap: float = DEFAULT_TIME_CAP
    payload_size: int = 0

    def __post_init__(self):
        if not self.R > 0:
            raise OutOfRange(f"R must be > 0, got {self.R}")
        if self.radio.R != self.R:
            object.__setattr__(self, "radio", replace(self.radio, R=self.R))
        if self.placement is Placement.UNIFORM and self.density is None and self.node_count is None:
            raise OutOfRange("Uniform placement needs a density or a node count")
        if self.density is not None and not self.density > 0:
            raise OutOfRange(f"density must be > 0, got {self.density}")
        if self.node_count is not None and self.node_count < 2:
            raise OutOfRange(f"node_count must be >= 2, got {self.node_count}")
        if self.lattice_margin < 0:
            raise OutOfRange(f"lattice margin must be >= 0, got {self.lattice_margin}")
        if self.seed_base < 0:
            raise OutOfRange(f"seed_base must be >= 0, got {self.seed_base}")
        if not self.time_cap > 0:
            raise OutOfRange(f"time cap must be > 0, got {self.time_cap}")
        if self.payload_size < 0:
            raise OutOfRange(f"payload size must be >= 0, got {self.payload_size}")

    def build_protocol(self) -> BroadcastProtocol:
        return self.protocol.build(self.R)

    def expected_node_count(self) -> Optional[int]:
        """
        Node count of a uniform placement, None for the ideal lattice
        """
        if self.placement is Placement.IDEAL:
            return None
        if self.node_count is not None:
            return self.node_count
        return round(self.density * self.region.area / self.R**2)


# value codecs


def _fmt_float(value: float) -> str:
    if math.isinf(value):
        return "inf" if value > 0 else "-inf"
    return repr(float(value))


def _parse_float(text: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise ConfigError(f"Expected a number, got {text!r}")
    if math.isnan(value):
        raise ConfigError("NaN is not a valid value")
    return value


def _parse_int(text: str) -> int:
    try:
        return int(text)
    except ValueError:
        raise ConfigError(f"Expected an integer, got {text!r}")


def _parse_bool(text: str) -> bool:
    lowered = text.lower()
    if lowered in ("true", "yes", "1"):
        return True
    if lowered in ("false", "no", "0"):
        return False
    raise ConfigError(f"Expected true or false, got {text!r}")


def _optional(parse: Callable[[str], Any]) -> Callable[[str], Any]:
    def parse_optional(text: str):
        return None if text.lower() == "none" else parse(text)

    return parse_optional


def _fmt_optional(fmt: Callable[[Any], str]) -> Callable[[Any], str]:
    def fmt_optional(value):
        return "none" if value is None else fmt(value)

    return fmt_optional


def _fmt_bool(value: bool) -> str:
    return "true" if value else "false"


_FLOAT = (_fmt_float, _parse_float)
_INT = (str, _parse_int)
_BOOL = (_fmt_bool, _parse_bool)
_STR = (str, str)
_OPT_FLOAT = (_fmt_optional(_fmt_float), _optional(_parse_float))
_OPT_INT = (_fmt_optional(str), _optional(_parse_int))

# key -> (section, field, codec). Section "" is the scenario itself.
_KEYS: dict[str, tuple[str, str, tuple]] = {
    "name": ("", "name", _STR),
    "R": ("", "R", _FLOAT),
    "density": ("", "density", _OPT_FLOAT),
    "node_count": ("", "node_count", _OPT_INT),
    "placement": ("", "placement", (lambda v: v.value, Placement)),
    "lattice_margin": ("", "lattice_margin", _FLOAT),
    "seed_base": ("", "seed_base", _INT),
    "time_cap": ("", "time_cap", _FLOAT),
    "payload_size": ("", "payload_size", _INT),
    "region.shape": ("region", "shape", (lambda v: v.value, RegionShape)),
    "region.radius": ("region", "radius", _FLOAT),
    "region.width": ("region", "width", _FLOAT),
    "region.height": ("region", "height", _FLOAT),
    "region.x": ("region", "x", _FLOAT),
    "region.y": ("region", "y", _FLOAT),
    "protocol.name": ("protocol", "name", _STR),
    "protocol.th_fraction": ("protocol", "th_fraction", _FLOAT),
    "protocol.max_delay": ("protocol", "max_delay", _FLOAT),
    "protocol.neighbor_count_discard": ("protocol", "neighbor_count_discard", _BOOL),
    "protocol.p": ("protocol", "p", _FLOAT),
    "protocol.counter_threshold": ("protocol", "counter_threshold", _FLOAT),
    "protocol.assess_delay": ("protocol", "assess_delay", _FLOAT),
    "protocol.distance_threshold": ("protocol", "distance_threshold", _OPT_FLOAT),
    "protocol.hello_interval": ("protocol", "hello_interval", _FLOAT),
    "mobility.kind": ("mobility", "kind", (lambda v: v.value, MobilityKind)),
    "mobility.mean_speed": ("mobility", "mean_speed", _FLOAT),
    "mobility.leg_duration": ("mobility", "leg_duration", _FLOAT),
    "mobility.tick": ("mobility", "tick", _FLOAT),
    "radio.distortion": ("radio", "distortion", _FLOAT),
    "radio.sectors": ("radio", "sectors", _INT),
    "radio.error_rate": ("radio", "error_rate", _FLOAT),
    "ci.target": ("ci", "target", _FLOAT),
    "ci.confidence": ("ci", "confidence", _FLOAT),
    "ci.min_trials": ("ci", "min_trials", _INT),
    "ci.max_trials": ("ci", "max_trials", _INT),
}


def _section_values(config: ScenarioConfig) -> dict[str, dict[str, Any]]:
    region = config.region
    return {
        "": {f.name: getattr(config, f.name) for f in fields(config)},
        "region": {
            "shape": region.shape,
            "radius": region.radius,
            "width": region.width,
            "height": region.height,
            "x": region.origin.x,
            "y": region.origin.y,
        },
        "protocol": {f.name: getattr(config.protocol, f.name) for f in fields(config.protocol)},
        "mobility": {f.name: getattr(config.mobility, f.name) for f in fields(config.mobility)},
        "radio": {f.name: getattr(config.radio, f.name) for f in fields(config.radio)},
        "ci": {f.name: getattr(config.ci, f.name) for f in fields(config.ci)},
    }


def config_to_dict(config: ScenarioConfig) -> dict[str, str]:
    """
    Flat dotted key -> value text, in the canonical key order
    """
    values = _section_values(config)
    return {key: codec[0](values[section][name]) for key, (section, name, codec) in _KEYS.items()}


def emit_config(config: ScenarioConfig) -> str:
    """
    Text form of a configuration, every key written
    """
    lines = [f"{key} = {value}" for key, value in config_to_dict(config).items()]
    return "\n".join(lines) + "\n"


def config_from_dict(items: dict[str, str]) -> ScenarioConfig:
    """
    Build a configuration from flat dotted keys, missing keys take their defaults
    :raises ConfigError: on an unknown key or a malformed value
    """
    sections: dict[str, dict[str, Any]] = {s: {} for s in ("", "region", "protocol", "mobility", "radio", "ci")}
    for key, text in items.items():
        if key not in _KEYS:
            raise ConfigError(f"Unknown configuration key {key!r}")
        section, name, codec = _KEYS[key]
        try:
            sections[section][name] = codec[1](text)
        except ValueError as e:
            raise ConfigError(f"Bad value for {key}: {e}")

    try:
        scenario = sections[""]
        region_values = sections["region"]
        if region_values:
            shape = region_values.pop("shape", RegionShape.RECTANGLE)
            origin = Point(region_values.pop("x", 0.0), region_values.pop("y", 0.0))
            scenario["region"] = Region(shape=shape, origin=origin, **region_values)
        for section, cls in (("protocol", ProtocolSpec), ("mobility", MobilityModel), ("radio", RadioModel), ("ci", CiPolicy)):
            if sections[section]:
                scenario[section] = cls(**sections[section])
        return ScenarioConfig(**scenario)
    except (OutOfRange, TypeError) as e:
        raise ConfigError(f"Invalid configuration: {e}")


def parse_config(text: str) -> ScenarioConfig:
    """
    Parse the text form
    :raises ConfigError: on a malformed line, a duplicate or unknown key, or a bad value
    """
    items: dict[str, str] = {}
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise ConfigError(f"Line {line_no}: expected 'key = value', got {raw!r}")
        key, value = key.strip(), value.strip()
        if key in items:
            raise ConfigError(f"Line {line_no}: duplicate key {key!r}")
        items[key] = value
    return config_from_dict(items)


def load_config(path: Union[str, Path]) -> ScenarioConfig:
    """
    Read and parse a configuration file
    """
    text = Path(path).read_text(encoding="utf-8")
    config = parse_config(text)
    logger.debug(f"Loaded configuration {config.name} from {path}")
    return config
