"""
Node mobility. Random walk with zero pause time: every leg has a uniform
heading and a speed drawn around the mean, nodes reflect off the region boundary.
"""

from dataclasses import dataclass, field
from enum import Enum
import logging
import math

import numpy as np

from .exceptions import OutOfRange
from .geometry import Region, RegionShape

logger = logging.getLogger(__name__)

DEFAULT_LEG_DURATION = 10.0
DEFAULT_TICK = 0.1

# legs shorter than this are finished
_TIME_EPSILON = 1e-12


class MobilityKind(Enum):
    STATIC = "static"
    RANDOM_WALK = "random_walk"


@dataclass(frozen=True)
class MobilityModel:
    kind: MobilityKind = MobilityKind.STATIC
    mean_speed: float = 0.0
    leg_duration: float = DEFAULT_LEG_DURATION
    tick: float = DEFAULT_TICK

    def __post_init__(self):
        if self.mean_speed < 0:
            raise OutOfRange(f"mean speed must be >= 0, got {self.mean_speed}")
        if not self.leg_duration > 0:
            raise OutOfRange(f"leg duration must be > 0, got {self.leg_duration}")
        if not self.tick > 0:
            raise OutOfRange(f"mobility tick must be > 0, got {self.tick}")

    @property
    def is_static(self) -> bool:
        return self.kind is MobilityKind.STATIC or self.mean_speed == 0.0

    @property
    def max_speed(self) -> float:
        return 0.0 if self.is_static else 1.5 * self.mean_speed


@dataclass
class MobilityState:
    """
    Current leg of every node. Each node draws from its own mobility stream.
    """

    region: Region
    rngs: list[np.random.Generator]
    heading: np.ndarray = field(default_factory=lambda: np.zeros(0))
    speed: np.ndarray = field(default_factory=lambda: np.zeros(0))
    leg_left: np.ndarray = field(default_factory=lambda: np.zeros(0))

    @classmethod
    def start(
        cls, model: MobilityModel, region: Region, rngs: list[np.random.Generator]
    ) -> "MobilityState":
        n = len(rngs)
        state = cls(
            region=region,
            rngs=rngs,
            heading=np.zeros(n),
            speed=np.zeros(n),
            leg_left=np.zeros(n),
        )
        if not model.is_static:
            for node in range(n):
                state.new_leg(model, node)
        return state

    def new_leg(self, model: MobilityModel, node: int) -> None:
        rng = self.rngs[node]
        self.heading[node] = rng.uniform(0.0, 2.0 * math.pi)
        self.speed[node] = rng.uniform(0.5, 1.5) * model.mean_speed
        self.leg_left[node] = model.leg_duration


def _reflect_interval(value: float, lo: float, hi: float) -> tuple[float, bool]:
    flipped = False
    while value < lo or value > hi:
        if value < lo:
            value = 2.0 * lo - value
        else:
            value = 2.0 * hi - value
        flipped = not flipped
    return value, flipped


def reflect(region: Region, x: float, y: float, heading: float) -> tuple[float, float, float]:
    """
    Bring a position that left the region back inside by mirroring it at the
    boundary, and mirror the heading with it.
    :return: (x, y, heading)
    """
    if region.shape is RegionShape.RECTANGLE:
        xmin, ymin, xmax, ymax = region.bounds
        x, flip_x = _reflect_interval(x, xmin, xmax)
        y, flip_y = _reflect_interval(y, ymin, ymax)
        dx, dy = math.cos(heading), math.sin(heading)
        if flip_x:
            dx = -dx
        if flip_y:
            dy = -dy
        return x, y, math.atan2(dy, dx) % (2.0 * math.pi)

    cx, cy = region.origin.as_tuple()
    rx, ry = x - cx, y - cy
    r = math.hypot(rx, ry)
    if r <= region.radius:
        return x, y, heading
    nx, ny = rx / r, ry / r
    mirrored = max(0.0, 2.0 * region.radius - r)
    dx, dy = math.cos(heading), math.sin(heading)
    dot = dx * nx + dy * ny
    dx, dy = dx - 2.0 * dot * nx, dy - 2.0 * dot * ny
    return cx + mirrored * nx, cy + mirrored * ny, math.atan2(dy, dx) % (2.0 * math.pi)


def step_mobility(model: MobilityModel, state: MobilityState, positions: np.ndarray, dt: float) -> np.ndarray:
    """
    Advance every node by dt seconds
    :param model: mobility model
    :param state: leg state, updated in place
    :param positions: (n, 2) positions at the start of the step
    :param dt: step length, > 0
    :return: new (n, 2) positions
    """
    if not dt > 0:
        raise OutOfRange(f"mobility step must be > 0, got {dt}")
    if model.is_static:
        return positions

    updated = positions.copy()
    for node in range(len(positions)):
        x, y = updated[node]
        remaining = dt
        while remaining > _TIME_EPSILON:
            span = min(remaining, state.leg_left[node])
            heading = state.heading[node]
            x += state.speed[node] * span * math.cos(heading)
            y += state.speed[node] * span * math.sin(heading)
            x, y, state.heading[node] = reflect(state.region, x, y, heading)
            state.leg_left[node] -= span
            remaining -= span
            if state.leg_left[node] <= _TIME_EPSILON:
                state.new_leg(model, node)
        updated[node] = (x, y)
    return updated
