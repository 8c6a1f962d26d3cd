"""
Radio propagation: unit disk of radius R, optionally distorted into per node
sector ranges, with a uniform packet error rate
"""

from dataclasses import dataclass
import logging
import math
from typing import NamedTuple

import numpy as np

from .exceptions import OutOfRange

logger = logging.getLogger(__name__)

# receptions happen this long after the transmission
PROPAGATION_DELAY = 1e-6


@dataclass(frozen=True)
class RadioModel:
    """
    distortion 0 is a perfect circle of radius R. With distortion d each of the
    sectors of a node gets its own range drawn from [(1 - d) * R, R].
    """

    R: float = 300.0
    distortion: float = 0.0
    sectors: int = 12
    error_rate: float = 0.0

    def __post_init__(self):
        if not self.R > 0:
            raise OutOfRange(f"R must be > 0, got {self.R}")
        if not 0.0 <= self.distortion < 1.0:
            raise OutOfRange(f"distortion must be in [0, 1), got {self.distortion}")
        if self.sectors < 1:
            raise OutOfRange(f"sectors must be >= 1, got {self.sectors}")
        if not 0.0 <= self.error_rate < 1.0:
            raise OutOfRange(f"error rate must be in [0, 1), got {self.error_rate}")

    @property
    def min_range(self) -> float:
        return (1.0 - self.distortion) * self.R


def sample_sector_ranges(radio: RadioModel, rng: np.random.Generator) -> np.ndarray:
    """
    Sector ranges of one node, sector k covers bearings [k, k + 1) * 2pi / sectors
    :param radio: radio model
    :param rng: the node's radio stream
    :return: array of radio.sectors ranges in meters
    """
    if radio.distortion == 0.0:
        return np.full(radio.sectors, radio.R)
    return rng.uniform(radio.min_range, radio.R, size=radio.sectors)


def sector_index(bearing: np.ndarray, sectors: int) -> np.ndarray:
    """
    Sector of each bearing (radians, any value)
    """
    wrapped = np.mod(bearing, 2.0 * math.pi)
    return np.minimum((wrapped * sectors / (2.0 * math.pi)).astype(int), sectors - 1)


class Delivery(NamedTuple):
    """
    Outcome of one transmission
    """

    receivers: np.ndarray
    time: float


def deliver(
    transmitter: int,
    radio: RadioModel,
    positions: np.ndarray,
    ranges: np.ndarray,
    rng: np.random.Generator,
    now: float,
    tolerance: float = 0.0,
) -> Delivery:
    """
    Nodes that receive one transmission.
    Exactly one error draw is taken per node (transmitter included) so the loss
    pattern does not depend on which nodes happen to be in range.
    :param transmitter: transmitting node id
    :param radio: radio model
    :param positions: (n, 2) node positions
    :param ranges: transmitter sector ranges
    :param rng: the transmitter's error stream
    :param now: transmission time
    :param tolerance: relative slack on the range, nodes up to (1 + tolerance) * range
        away still receive. Lattice placements use GEOMETRIC_EPSILON so neighbours
        placed at R up to rounding hear each other.
    :return: Delivery with receiving ids and reception time
    """
    delta = positions - positions[transmitter]
    if tolerance < 0:
        raise OutOfRange(f"range tolerance must be >= 0, got {tolerance}")
    distance = np.hypot(delta[:, 0], delta[:, 1]) / (1.0 + tolerance)
    if radio.distortion == 0.0:
        in_range = distance <= radio.R
    else:
        bearing = np.arctan2(delta[:, 1], delta[:, 0])
        in_range = distance <= ranges[sector_index(bearing, radio.sectors)]
    in_range[transmitter] = False

    draws = rng.random(len(positions))
    if radio.error_rate > 0.0:
        survived = draws >= radio.error_rate
    else:
        survived = np.ones(len(positions), dtype=bool)

    receivers = np.flatnonzero(in_range & survived)
    return Delivery(receivers=receivers, time=now + PROPAGATION_DELAY)
