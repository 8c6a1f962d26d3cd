"""
Hexagonal covering-lattice geometry used to pick strategic rebroadcast locations
"""

from dataclasses import dataclass, field
from enum import Enum
import logging
import math
from typing import NamedTuple, Optional

from .exceptions import DegenerateGeometry, OutOfRange

logger = logging.getLogger(__name__)

# points closer than GEOMETRIC_EPSILON * R are the same point
GEOMETRIC_EPSILON = 1e-6

SQRT3_2 = math.sqrt(3.0) / 2.0


@dataclass(frozen=True)
class Point:
    """
    Planar position in meters
    """

    x: float
    y: float

    def __post_init__(self):
        if not (math.isfinite(self.x) and math.isfinite(self.y)):
            raise OutOfRange(f"Point coordinates must be finite, got ({self.x}, {self.y})")

    def distance_to(self, other: "Point") -> float:
        return math.hypot(self.x - other.x, self.y - other.y)

    def translated(self, dx: float, dy: float) -> "Point":
        return Point(self.x + dx, self.y + dy)

    def as_tuple(self) -> tuple[float, float]:
        return self.x, self.y


ORIGIN = Point(0.0, 0.0)


class RegionShape(Enum):
    CIRCLE = "circle"
    RECTANGLE = "rectangle"


@dataclass(frozen=True)
class Region:
    """
    Simulation area. A circle is given by radius and center (origin), a rectangle
    by width, height and its lower left corner (origin).
    """

    shape: RegionShape
    radius: float = 0.0
    width: float = 0.0
    height: float = 0.0
    origin: Point = field(default=ORIGIN)

    def __post_init__(self):
        match self.shape:
            case RegionShape.CIRCLE:
                if not self.radius > 0:
                    raise OutOfRange(f"Circle radius must be > 0, got {self.radius}")
            case RegionShape.RECTANGLE:
                if not (self.width > 0 and self.height > 0):
                    raise OutOfRange(
                        f"Rectangle sides must be > 0, got {self.width} x {self.height}"
                    )
            case _:
                raise OutOfRange(f"Unknown region shape {self.shape}")

    @classmethod
    def circle(cls, radius: float, center: Point = ORIGIN) -> "Region":
        return cls(shape=RegionShape.CIRCLE, radius=radius, origin=center)

    @classmethod
    def rectangle(cls, width: float, height: float, origin: Point = ORIGIN) -> "Region":
        return cls(shape=RegionShape.RECTANGLE, width=width, height=height, origin=origin)

    @property
    def center(self) -> Point:
        if self.shape is RegionShape.CIRCLE:
            return self.origin
        return self.origin.translated(self.width / 2.0, self.height / 2.0)

    @property
    def area(self) -> float:
        if self.shape is RegionShape.CIRCLE:
            return math.pi * self.radius**2
        return self.width * self.height

    @property
    def bounds(self) -> tuple[float, float, float, float]:
        """
        Axis aligned bounding box
        :return: (xmin, ymin, xmax, ymax)
        """
        if self.shape is RegionShape.CIRCLE:
            cx, cy = self.origin.as_tuple()
            r = self.radius
            return cx - r, cy - r, cx + r, cy + r
        x0, y0 = self.origin.as_tuple()
        return x0, y0, x0 + self.width, y0 + self.height

    def contains(self, p: Point, margin: float = 0.0) -> bool:
        """
        Closed containment test
        :param p: point to test
        :param margin: grow the region by this distance (meters)
        :return: True if p is inside or on the boundary
        """
        if self.shape is RegionShape.CIRCLE:
            return p.distance_to(self.origin) <= self.radius + margin
        xmin, ymin, xmax, ymax = self.bounds
        return (
            xmin - margin <= p.x <= xmax + margin and ymin - margin <= p.y <= ymax + margin
        )

    def describe(self) -> str:
        if self.shape is RegionShape.CIRCLE:
            return f"circle r={self.radius:g}"
        return f"{self.width:g}x{self.height:g}"


class StrategicCandidate(NamedTuple):
    """
    Nearest strategic location and the node's distance to it
    """

    location: Point
    distance_from_node: float


def _check_range(R: float) -> None:
    if not R > 0:
        raise OutOfRange(f"Transmission range R must be > 0, got {R}")


def hex_vertices(center: Point, R: float) -> list[Point]:
    """
    Vertices of the regular hexagon of circumradius R around center.
    First vertex at center + (R, 0), then counterclockwise.
    :param center: hexagon center
    :param R: circumradius (transmission range)
    :return: list of 6 points
    """
    _check_range(R)
    return [
        Point(center.x + R * math.cos(k * math.pi / 3.0), center.y + R * math.sin(k * math.pi / 3.0))
        for k in range(6)
    ]


def forward_candidates(L1: Point, L2: Point, R: float) -> list[Point]:
    """
    The two lattice neighbours of L2 other than the one toward L1. Each lies at
    distance R from L2, 120 degrees from the L2 -> L1 direction.
    :param L1: known (upstream) neighbour of L2
    :param L2: lattice vertex, location of the transmitter
    :param R: lattice side
    :return: [L2 + R*rot(+120)(u), L2 + R*rot(-120)(u)] where u points from L2 to L1
    :raises DegenerateGeometry: if L1 and L2 coincide
    """
    _check_range(R)
    dx = L1.x - L2.x
    dy = L1.y - L2.y
    d = math.hypot(dx, dy)
    if d < GEOMETRIC_EPSILON * R:
        raise DegenerateGeometry(f"L1 {L1} and L2 {L2} coincide, use hex_vertices for the source")
    ux, uy = dx / d, dy / d
    candidates = []
    for angle in (2.0 * math.pi / 3.0, -2.0 * math.pi / 3.0):
        c, s = math.cos(angle), math.sin(angle)
        candidates.append(Point(L2.x + R * (ux * c - uy * s), L2.y + R * (ux * s + uy * c)))
    return candidates


def outward_candidate(L1: Point, L2: Point, R: float) -> Point:
    """
    The lattice neighbour of L2 pointing away from L1, L2 + R * unit(L2 - L1).
    Used by the neighbours of the source, whose L1 is the hexagon centre.
    :raises DegenerateGeometry: if L1 and L2 coincide
    """
    _check_range(R)
    dx = L2.x - L1.x
    dy = L2.y - L1.y
    d = math.hypot(dx, dy)
    if d < GEOMETRIC_EPSILON * R:
        raise DegenerateGeometry(f"L1 {L1} and L2 {L2} coincide, use hex_vertices for the source")
    return Point(L2.x + R * dx / d, L2.y + R * dy / d)


def nearest_strategic(
    node_pos: Point,
    L1: Point,
    L2: Point,
    source_pos: Point,
    from_source: bool,
    R: float,
    from_source_neighbor: bool = False,
) -> StrategicCandidate:
    """
    Find the strategic location nearest to a receiving node.
    :param node_pos: position of the receiving node
    :param L1: header field L1
    :param L2: header field L2 (transmitter location)
    :param source_pos: source location, used when from_source is set
    :param from_source: packet was transmitted by the source itself
    :param R: transmission range
    :param from_source_neighbor: packet was relayed by a neighbour of the source,
        whose only strategic location is the outward one
    :return: StrategicCandidate, ties go to the first candidate in list order
    """
    if from_source:
        candidates = hex_vertices(source_pos, R)
    elif from_source_neighbor:
        candidates = [outward_candidate(L1, L2, R)]
    else:
        candidates = forward_candidates(L1, L2, R)
    best = candidates[0]
    best_distance = node_pos.distance_to(best)
    for candidate in candidates[1:]:
        distance = node_pos.distance_to(candidate)
        if distance < best_distance:
            best, best_distance = candidate, distance
    return StrategicCandidate(location=best, distance_from_node=best_distance)


def _lattice_keeps(region: Region, p: Point, margin: float, eps: float) -> bool:
    # circles keep vertices on the boundary, rectangles drop vertices on an edge
    if region.shape is RegionShape.CIRCLE:
        return p.distance_to(region.origin) <= region.radius + margin + eps
    xmin, ymin, xmax, ymax = region.bounds
    return (
        xmin - margin + eps < p.x < xmax + margin - eps
        and ymin - margin + eps < p.y < ymax + margin - eps
    )


def ideal_lattice(region: Region, source: Point, R: float, margin: Optional[float] = None) -> list[Point]:
    """
    Node placement for the ideal case: the source plus the vertices of the side R
    hexagon tiling whose central hexagon is centred on the source with one vertex
    along +x.
    :param region: simulation region
    :param source: source location, must lie inside the region
    :param R: transmission range
    :param margin: keep vertices up to this distance outside the region, R if None.
        0 keeps the interior only, circles closed and rectangles open.
    :return: lattice points ordered by distance from source, then angle
    """
    _check_range(R)
    if margin is None:
        margin = R
    if margin < 0:
        raise OutOfRange(f"margin must be >= 0, got {margin}")
    if not region.contains(source, margin=GEOMETRIC_EPSILON * R):
        raise OutOfRange(f"Source {source} is outside region {region.describe()}")

    eps = GEOMETRIC_EPSILON * R
    xmin, ymin, xmax, ymax = region.bounds
    reach = max(
        math.hypot(x - source.x, y - source.y) for x in (xmin, xmax) for y in (ymin, ymax)
    ) + margin
    b_max = int(math.ceil(reach / (R * SQRT3_2))) + 1

    points = []
    for b in range(-b_max, b_max + 1):
        a_max = int(math.ceil(reach / R + abs(b) / 2.0)) + 1
        for a in range(-a_max, a_max + 1):
            # triangular lattice points with a - b divisible by 3 are hexagon centres
            if (a - b) % 3 == 0 and (a, b) != (0, 0):
                continue
            p = Point(source.x + R * (a + b / 2.0), source.y + R * b * SQRT3_2)
            if (a, b) == (0, 0) or _lattice_keeps(region, p, margin, eps):
                points.append(p)

    def order(p: Point) -> tuple[float, float]:
        angle = math.atan2(p.y - source.y, p.x - source.x) % (2.0 * math.pi)
        return round(p.distance_to(source) / R, 9), round(angle, 9)

    points.sort(key=order)
    logger.debug(f"Ideal lattice for {region.describe()} has {len(points)} points")
    return points
