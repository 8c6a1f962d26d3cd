"""
Optimized Flooding Protocol (OFP) node state machine.

A node that receives a broadcast packet first checks whether it can discard it,
otherwise it waits a delay proportional to its distance from the nearest
strategic location, checks again, and rebroadcasts with an updated location
header. The simulator drives every protocol through the BroadcastProtocol
interface defined here.
"""

from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from enum import Enum
import logging
import math
from typing import TYPE_CHECKING, Callable, Optional, Union

import numpy as np

from .exceptions import OutOfRange, SimulationError
from .geometry import GEOMETRIC_EPSILON, Point, StrategicCandidate, nearest_strategic
from .packet import OFP_HEADER_SIZE, PACKET_ID, BroadcastPacket, HopStage, PacketId

if TYPE_CHECKING:
    from .baselines import HelloRecord

logger = logging.getLogger(__name__)

DEFAULT_RANGE = 300.0
DEFAULT_TH_FRACTION = 0.4
DEFAULT_MAX_DELAY = 0.050


class DiscardReason(Enum):
    """
    Why a node did not (re)schedule or transmit a packet
    """

    SELF_ECHO = "self_echo"
    ALREADY_TRANSMITTED = "already_transmitted"
    THRESHOLD = "threshold"
    SINGLE_NEIGHBOR = "single_neighbor"
    PENDING = "pending"
    DUPLICATE = "duplicate"
    GOSSIP = "gossip"
    COUNTER = "counter"
    NOT_DESIGNATED = "not_designated"
    NOT_NEAREST = "not_nearest"


@dataclass(frozen=True)
class Discard:
    reason: DiscardReason


@dataclass(frozen=True)
class Schedule:
    delay: float
    candidate: Optional[StrategicCandidate] = None


@dataclass(frozen=True)
class Transmit:
    packet: BroadcastPacket


Decision = Union[Discard, Schedule, Transmit]


@dataclass(frozen=True)
class OfpParams:
    """
    OFP tuning. The threshold is a fraction of R, Th = th_fraction * R meters.
    """

    R: float = DEFAULT_RANGE
    th_fraction: float = DEFAULT_TH_FRACTION
    max_delay: float = DEFAULT_MAX_DELAY
    neighbor_count_discard: bool = False

    def __post_init__(self):
        if not self.R > 0:
            raise OutOfRange(f"R must be > 0, got {self.R}")
        if not 0 < self.th_fraction < 1:
            raise OutOfRange(f"th_fraction must be in (0, 1), got {self.th_fraction}")
        if not self.max_delay > 0:
            raise OutOfRange(f"max_delay must be > 0, got {self.max_delay}")

    @property
    def threshold(self) -> float:
        return self.th_fraction * self.R


@dataclass
class NodePacketState:
    """
    Per node, per packet record.
    d_min is the distance to the nearest transmitter of the packet heard so far.
    preempted is set while a rebroadcast is pending when a copy arrives from a
    transmitter closer to the pending strategic location than this node.
    """

    received: bool = False
    transmitted: bool = False
    d_min: float = math.inf
    pending_at: Optional[float] = None
    pending_header: Optional[tuple[Point, Point]] = None
    pending_candidate: Optional[StrategicCandidate] = None
    preempted: bool = False
    copies: int = 0

    def mark_originated(self) -> None:
        self.received = True
        self.transmitted = True
        self.d_min = 0.0

    def hear(self, node_pos: Point, transmitter_pos: Point) -> None:
        self.received = True
        self.copies += 1
        self.d_min = min(self.d_min, node_pos.distance_to(transmitter_pos))

    def outranked_by(self, transmitter_pos: Point, R: float) -> bool:
        candidate = self.pending_candidate
        if candidate is None:
            return False
        closer = transmitter_pos.distance_to(candidate.location)
        return closer < candidate.distance_from_node - GEOMETRIC_EPSILON * R

    def clear_pending(self) -> Optional[tuple[Point, Point]]:
        header = self.pending_header
        self.pending_at = None
        self.pending_header = None
        self.pending_candidate = None
        self.preempted = False
        return header


@dataclass
class NodeContext:
    """
    What a protocol running on a node may use: identity, current position, its
    own random stream, hello records and (optionally) an omniscient neighbour count.
    """

    node_id: int
    position: Point
    rng: np.random.Generator
    hellos: dict[int, "HelloRecord"] = field(default_factory=dict)
    neighbor_count: Optional[Callable[[], int]] = None


def compute_delay(l: float, params: OfpParams) -> float:
    """
    Rebroadcast delay, max_delay * min(l / R, 1)
    :param l: distance to the nearest strategic location (meters)
    :param params: OFP parameters
    :return: delay in seconds
    """
    if l < 0:
        raise OutOfRange(f"distance l must be >= 0, got {l}")
    return params.max_delay * min(l / params.R, 1.0)


def ofp_on_receive(
    state: NodePacketState,
    packet: BroadcastPacket,
    node_pos: Point,
    params: OfpParams,
    now: float,
    node_id: Optional[int] = None,
    neighbor_count: Optional[int] = None,
) -> Decision:
    """
    Handle a received copy. State is updated in place.
    :param state: node record for this packet
    :param packet: received copy, L2 is the transmitter location
    :param node_pos: receiving node position
    :param params: OFP parameters
    :param now: simulation time
    :param node_id: receiving node, used to drop echoes of its own packets
    :param neighbor_count: omniscient neighbour count, only read when the
        single neighbour discard rule is enabled
    :return: Discard or Schedule
    """
    state.hear(node_pos, packet.L2)

    if node_id is not None and packet.packet_id.origin == node_id:
        return Discard(DiscardReason.SELF_ECHO)
    if state.transmitted:
        return Discard(DiscardReason.ALREADY_TRANSMITTED)
    if state.d_min < params.threshold:
        return Discard(DiscardReason.THRESHOLD)
    if params.neighbor_count_discard and neighbor_count == 1:
        return Discard(DiscardReason.SINGLE_NEIGHBOR)
    if state.pending_at is not None:
        # the check at timer expiry sees the lowered d_min and the preemption
        if state.outranked_by(packet.L2, params.R):
            state.preempted = True
        return Discard(DiscardReason.PENDING)

    candidate = nearest_strategic(
        node_pos,
        packet.L1,
        packet.L2,
        source_pos=packet.L1,
        from_source=packet.hop_from_source,
        R=params.R,
        from_source_neighbor=packet.stage is HopStage.SOURCE_NEIGHBOR,
    )
    delay = compute_delay(candidate.distance_from_node, params)
    state.pending_at = now + delay
    state.pending_header = (packet.L1, packet.L2)
    state.pending_candidate = candidate
    return Schedule(delay=delay, candidate=candidate)


def ofp_on_timer(
    state: NodePacketState,
    packet_template: BroadcastPacket,
    node_pos: Point,
    params: OfpParams,
    now: float,
) -> Decision:
    """
    Rebroadcast delay expired. Re-check the threshold, give way if a node nearer
    the strategic location relayed meanwhile, otherwise transmit.
    :param state: node record for this packet
    :param packet_template: the copy that triggered the schedule
    :param node_pos: node position now
    :param params: OFP parameters
    :param now: simulation time
    :return: Discard or Transmit
    :raises SimulationError: if no rebroadcast is pending
    """
    if state.pending_at is None or state.pending_header is None or not state.received:
        raise SimulationError(f"Timer fired at {now} without a pending rebroadcast")
    if not math.isclose(state.pending_at, now, rel_tol=0.0, abs_tol=1e-9):
        raise SimulationError(f"Timer fired at {now}, expected {state.pending_at}")

    preempted = state.preempted
    _, upstream = state.clear_pending()
    if state.d_min < params.threshold:
        return Discard(DiscardReason.THRESHOLD)
    if preempted:
        return Discard(DiscardReason.NOT_NEAREST)

    state.transmitted = True
    state.d_min = 0.0
    return Transmit(packet_template.relayed(upstream=upstream, own=node_pos))


def originate(node_id: int, position: Point, seq: int = 0, payload_size: int = 0) -> BroadcastPacket:
    """
    Packet as first sent by the source, with L1 = L2 = source location
    """
    return BroadcastPacket(
        packet_id=PacketId(node_id, seq),
        L1=position,
        L2=position,
        stage=HopStage.SOURCE,
        payload_size=payload_size,
    )


class BroadcastProtocol(ABC):
    """
    Base class for broadcast protocols run by the simulator
    """

    name: str = "broadcast"
    uses_hello: bool = False

    def __init__(self, R: float = DEFAULT_RANGE, **kwargs):
        """
        Initialize protocol
        :param R: transmission range
        """
        if not R > 0:
            raise OutOfRange(f"R must be > 0, got {R}")
        self.R = R

    def originate(
        self, node: NodeContext, now: float = 0.0, seq: int = 0, payload_size: int = 0
    ) -> BroadcastPacket:
        """
        Build the source packet. Protocols carrying extra header fields override this.
        """
        return originate(node.node_id, node.position, seq=seq, payload_size=payload_size)

    def header_size(self, packet: BroadcastPacket) -> int:
        """
        Protocol header bytes carried by one transmission of packet
        """
        return PACKET_ID.size

    @abstractmethod
    def on_receive(
        self, node: NodeContext, state: NodePacketState, packet: BroadcastPacket, now: float
    ) -> Decision:
        """
        Handle a received data packet.
        Must be implemented in concrete subclasses.
        """

    def on_timer(
        self, node: NodeContext, state: NodePacketState, packet: BroadcastPacket, now: float
    ) -> Decision:
        """
        Handle an expired rebroadcast timer. Protocols that never schedule keep this.
        """
        raise SimulationError(f"{self.name} does not use timers, node {node.node_id}")

    def describe(self) -> str:
        return self.name


class OfpProtocol(BroadcastProtocol):
    """
    Optimized Flooding Protocol
    """

    name = "ofp"

    def __init__(self, params: OfpParams = OfpParams(), **kwargs):
        super().__init__(R=params.R, **kwargs)
        self.params = params

    def on_receive(
        self, node: NodeContext, state: NodePacketState, packet: BroadcastPacket, now: float
    ) -> Decision:
        neighbor_count = None
        if self.params.neighbor_count_discard and node.neighbor_count is not None:
            neighbor_count = node.neighbor_count()
        return ofp_on_receive(
            state,
            packet,
            node.position,
            self.params,
            now,
            node_id=node.node_id,
            neighbor_count=neighbor_count,
        )

    def on_timer(
        self, node: NodeContext, state: NodePacketState, packet: BroadcastPacket, now: float
    ) -> Decision:
        return ofp_on_timer(state, packet, node.position, self.params, now)

    def header_size(self, packet: BroadcastPacket) -> int:
        return OFP_HEADER_SIZE

    def describe(self) -> str:
        return f"ofp th={self.params.th_fraction:g}"
