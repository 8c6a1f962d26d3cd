"""
Comparison broadcast protocols: blind flooding, gossip, counter based,
distance based and an AHBP-style protocol that designates Broadcast Relay
Gateways (BRGs) from 2-hop neighbour knowledge gathered with hello messages.
"""

from dataclasses import dataclass
from enum import Enum
import logging
import math
from typing import Iterable, Mapping, Optional

import numpy as np

from .exceptions import OutOfRange, SimulationError
from .geometry import Point
from .packet import BRG_COUNT, BRG_ID, OFP_HEADER_SIZE, PACKET_ID, BroadcastPacket, HelloPacket, HopStage
from .protocol import (
    DEFAULT_MAX_DELAY,
    DEFAULT_RANGE,
    DEFAULT_TH_FRACTION,
    BroadcastProtocol,
    Decision,
    Discard,
    DiscardReason,
    NodeContext,
    NodePacketState,
    Schedule,
    Transmit,
)

logger = logging.getLogger(__name__)

DEFAULT_GOSSIP_P = 0.65
DEFAULT_COUNTER_THRESHOLD = 3
DEFAULT_HELLO_INTERVAL = 10.0


class BaselineKind(Enum):
    FLOOD = "flood"
    GOSSIP = "gossip"
    COUNTER = "counter"
    DISTANCE = "distance"
    AHBP = "ahbp"


@dataclass(frozen=True)
class HelloRecord:
    """
    Last hello heard from a neighbour.
    position is where the neighbour was when it sent the hello.
    """

    neighbor_id: int
    neighbors: frozenset[int]
    timestamp: float
    position: Point


@dataclass(frozen=True)
class BaselineParams:
    """
    Parameters of the comparison protocols. distance_threshold None means 0.4 * R.
    p = 0 and distance_threshold = 0 are accepted as degenerate settings.
    """

    kind: BaselineKind = BaselineKind.FLOOD
    R: float = DEFAULT_RANGE
    p: float = DEFAULT_GOSSIP_P
    counter_threshold: float = DEFAULT_COUNTER_THRESHOLD
    assess_delay: float = DEFAULT_MAX_DELAY
    distance_threshold: Optional[float] = None
    hello_interval: float = DEFAULT_HELLO_INTERVAL

    def __post_init__(self):
        if not self.R > 0:
            raise OutOfRange(f"R must be > 0, got {self.R}")
        if not 0.0 <= self.p <= 1.0:
            raise OutOfRange(f"p must be in [0, 1], got {self.p}")
        if not self.counter_threshold >= 1:
            raise OutOfRange(f"counter threshold must be >= 1, got {self.counter_threshold}")
        if not self.assess_delay > 0:
            raise OutOfRange(f"assess delay must be > 0, got {self.assess_delay}")
        if self.distance_threshold is not None and not self.distance_threshold >= 0:
            raise OutOfRange(f"distance threshold must be >= 0, got {self.distance_threshold}")
        if not self.hello_interval > 0:
            raise OutOfRange(f"hello interval must be > 0, got {self.hello_interval}")

    @property
    def distance(self) -> float:
        if self.distance_threshold is None:
            return DEFAULT_TH_FRACTION * self.R
        return self.distance_threshold

    @property
    def stale_horizon(self) -> float:
        return 2.0 * self.hello_interval


def _first_copy(state: NodePacketState, packet: BroadcastPacket, node_id: Optional[int]) -> Optional[Discard]:
    if node_id is not None and packet.packet_id.origin == node_id:
        return Discard(DiscardReason.SELF_ECHO)
    if state.transmitted:
        return Discard(DiscardReason.ALREADY_TRANSMITTED)
    if state.copies > 1:
        return Discard(DiscardReason.DUPLICATE)
    return None


def _transmit(state: NodePacketState, packet: BroadcastPacket, upstream: Point, node_pos: Point, **kwargs) -> Transmit:
    state.transmitted = True
    state.d_min = 0.0
    return Transmit(packet.relayed(upstream=upstream, own=node_pos, **kwargs))


def _assess_delay(assess_delay: float, rng: np.random.Generator) -> float:
    # uniform in (0, assess_delay]
    return assess_delay * (1.0 - rng.random())


def flood_on_receive(
    state: NodePacketState, packet: BroadcastPacket, node_pos: Point, node_id: Optional[int] = None
) -> Decision:
    """
    Blind flooding: rebroadcast the first copy, drop every other one
    """
    state.hear(node_pos, packet.L2)
    discard = _first_copy(state, packet, node_id)
    if discard is not None:
        return discard
    return _transmit(state, packet, packet.L2, node_pos)


def gossip_on_receive(
    state: NodePacketState,
    packet: BroadcastPacket,
    node_pos: Point,
    p: float,
    rng: np.random.Generator,
    node_id: Optional[int] = None,
) -> Decision:
    """
    Gossip: rebroadcast the first copy with probability p.
    Takes exactly one draw from rng per first reception.
    """
    state.hear(node_pos, packet.L2)
    discard = _first_copy(state, packet, node_id)
    if discard is not None:
        return discard
    if rng.random() < p:
        return _transmit(state, packet, packet.L2, node_pos)
    return Discard(DiscardReason.GOSSIP)


def counter_on_receive(
    state: NodePacketState,
    packet: BroadcastPacket,
    node_pos: Point,
    assess_delay: float,
    rng: np.random.Generator,
    now: float,
    node_id: Optional[int] = None,
) -> Decision:
    """
    Counter based scheme. The first copy starts the assessment timer, every
    later copy only raises the counter (state.copies).
    """
    state.hear(node_pos, packet.L2)
    discard = _first_copy(state, packet, node_id)
    if discard is not None:
        return discard
    delay = _assess_delay(assess_delay, rng)
    state.pending_at = now + delay
    state.pending_header = (packet.L1, packet.L2)
    return Schedule(delay=delay)


def counter_on_timer(
    state: NodePacketState, packet: BroadcastPacket, node_pos: Point, C: float, now: float
) -> Decision:
    """
    Assessment over, transmit iff fewer than C copies were heard
    """
    header = _expire(state, now)
    if state.copies >= C:
        return Discard(DiscardReason.COUNTER)
    return _transmit(state, packet, header[1], node_pos)


def distance_on_receive(
    state: NodePacketState,
    packet: BroadcastPacket,
    node_pos: Point,
    assess_delay: float,
    rng: np.random.Generator,
    now: float,
    node_id: Optional[int] = None,
) -> Decision:
    """
    Distance based scheme. Same timer as the counter scheme, d_min comes from
    the L2 field of every copy heard.
    """
    return counter_on_receive(state, packet, node_pos, assess_delay, rng, now, node_id=node_id)


def distance_on_timer(
    state: NodePacketState, packet: BroadcastPacket, node_pos: Point, D: float, now: float
) -> Decision:
    """
    Assessment over, transmit iff no transmitter was heard closer than D
    """
    header = _expire(state, now)
    if state.d_min < D:
        return Discard(DiscardReason.THRESHOLD)
    return _transmit(state, packet, header[1], node_pos)


def _expire(state: NodePacketState, now: float) -> tuple[Point, Point]:
    if state.pending_at is None or state.pending_header is None:
        raise SimulationError(f"Assessment timer fired at {now} without a pending packet")
    return state.clear_pending()


def neighbor_tables(
    records: Mapping[int, HelloRecord], now: float, horizon: float
) -> tuple[dict[int, Point], dict[int, frozenset[int]]]:
    """
    Fresh 1-hop and 2-hop knowledge from hello records.
    :param records: hello records by neighbour id
    :param now: simulation time
    :param horizon: records older than this are dropped (2 * hello interval)
    :return: (neighbour id -> last known position, neighbour id -> its reported neighbours)
    """
    one_hop: dict[int, Point] = {}
    two_hop: dict[int, frozenset[int]] = {}
    for neighbor_id, record in records.items():
        if now - record.timestamp > horizon:
            continue
        one_hop[neighbor_id] = record.position
        two_hop[neighbor_id] = record.neighbors
    return one_hop, two_hop


def ahbp_select_brgs(
    self_neighbors: Iterable[int],
    two_hop_map: Mapping[int, Iterable[int]],
    self_id: Optional[int] = None,
    covered: Iterable[int] = (),
    exclude: Iterable[int] = (),
) -> frozenset[int]:
    """
    Greedy cover of the 2-hop neighbourhood by 1-hop neighbours.
    :param self_neighbors: 1-hop neighbour ids
    :param two_hop_map: neighbour id -> ids that neighbour reported
    :param self_id: own id, never a node to cover
    :param covered: nodes known to have the packet already
    :param exclude: neighbours that may not be chosen
    :return: chosen BRG ids, empty when nothing is left to cover
    """
    one_hop = set(self_neighbors)
    reach = {n: frozenset(two_hop_map.get(n, ())) for n in one_hop}
    uncovered: set[int] = set().union(*reach.values()) if reach else set()
    uncovered -= one_hop
    uncovered -= set(covered)
    uncovered.discard(self_id)

    candidates = sorted(one_hop - set(exclude))
    brgs: set[int] = set()
    while uncovered:
        best, best_gain = None, 0
        for neighbor in candidates:
            if neighbor in brgs:
                continue
            gain = len(uncovered & reach[neighbor])
            # ascending order plus strict comparison gives ties to the lowest id
            if gain > best_gain:
                best, best_gain = neighbor, gain
        if best is None:
            break
        brgs.add(best)
        uncovered -= reach[best]
    return frozenset(brgs)


def make_hello(node: NodeContext, now: float, horizon: float) -> HelloPacket:
    """
    Hello beacon listing the neighbours this node currently considers fresh
    """
    one_hop, _ = neighbor_tables(node.hellos, now, horizon)
    return HelloPacket(sender=node.node_id, position=node.position, neighbors=frozenset(one_hop))


def on_hello(node: NodeContext, hello: HelloPacket, now: float) -> HelloRecord:
    """
    Store or refresh the record of the hello sender
    """
    record = HelloRecord(
        neighbor_id=hello.sender,
        neighbors=hello.neighbors,
        timestamp=now,
        position=hello.position,
    )
    node.hellos[hello.sender] = record
    return record


class FloodProtocol(BroadcastProtocol):
    """
    Blind flooding
    """

    name = "flood"

    def on_receive(
        self, node: NodeContext, state: NodePacketState, packet: BroadcastPacket, now: float
    ) -> Decision:
        return flood_on_receive(state, packet, node.position, node_id=node.node_id)


class GossipProtocol(BroadcastProtocol):
    """
    Probabilistic forwarding
    """

    name = "gossip"

    def __init__(self, params: BaselineParams = BaselineParams(kind=BaselineKind.GOSSIP), **kwargs):
        super().__init__(R=params.R, **kwargs)
        self.params = params

    def on_receive(
        self, node: NodeContext, state: NodePacketState, packet: BroadcastPacket, now: float
    ) -> Decision:
        return gossip_on_receive(state, packet, node.position, self.params.p, node.rng, node_id=node.node_id)

    def describe(self) -> str:
        return f"gossip p={self.params.p:g}"


class CounterProtocol(BroadcastProtocol):
    """
    Counter based suppression
    """

    name = "counter"

    def __init__(self, params: BaselineParams = BaselineParams(kind=BaselineKind.COUNTER), **kwargs):
        super().__init__(R=params.R, **kwargs)
        self.params = params

    def on_receive(
        self, node: NodeContext, state: NodePacketState, packet: BroadcastPacket, now: float
    ) -> Decision:
        return counter_on_receive(
            state, packet, node.position, self.params.assess_delay, node.rng, now, node_id=node.node_id
        )

    def on_timer(
        self, node: NodeContext, state: NodePacketState, packet: BroadcastPacket, now: float
    ) -> Decision:
        return counter_on_timer(state, packet, node.position, self.params.counter_threshold, now)

    def describe(self) -> str:
        C = self.params.counter_threshold
        return "counter C=inf" if math.isinf(C) else f"counter C={C:g}"


class DistanceProtocol(BroadcastProtocol):
    """
    Distance based suppression, positions carried in the OFP location header
    """

    name = "distance"

    def __init__(self, params: BaselineParams = BaselineParams(kind=BaselineKind.DISTANCE), **kwargs):
        super().__init__(R=params.R, **kwargs)
        self.params = params

    def on_receive(
        self, node: NodeContext, state: NodePacketState, packet: BroadcastPacket, now: float
    ) -> Decision:
        return distance_on_receive(
            state, packet, node.position, self.params.assess_delay, node.rng, now, node_id=node.node_id
        )

    def on_timer(
        self, node: NodeContext, state: NodePacketState, packet: BroadcastPacket, now: float
    ) -> Decision:
        return distance_on_timer(state, packet, node.position, self.params.distance, now)

    def header_size(self, packet: BroadcastPacket) -> int:
        return OFP_HEADER_SIZE

    def describe(self) -> str:
        return f"distance D={self.params.distance:g}"


class AhbpProtocol(BroadcastProtocol):
    """
    AHBP-style relay designation. Only nodes listed in the BRG set of the first
    copy they receive rebroadcast, and they do so at once after choosing their own BRGs.
    """

    name = "ahbp"
    uses_hello = True

    def __init__(self, params: BaselineParams = BaselineParams(kind=BaselineKind.AHBP), **kwargs):
        super().__init__(R=params.R, **kwargs)
        self.params = params

    @property
    def hello_interval(self) -> float:
        return self.params.hello_interval

    def originate(
        self, node: NodeContext, now: float = 0.0, seq: int = 0, payload_size: int = 0
    ) -> BroadcastPacket:
        packet = super().originate(node, now=now, seq=seq, payload_size=payload_size)
        one_hop, two_hop = neighbor_tables(node.hellos, now, self.params.stale_horizon)
        brgs = ahbp_select_brgs(one_hop, two_hop, self_id=node.node_id)
        logger.debug(f"Source {node.node_id} designates BRGs {sorted(brgs)}")
        return BroadcastPacket(
            packet_id=packet.packet_id,
            L1=packet.L1,
            L2=packet.L2,
            stage=HopStage.SOURCE,
            payload_size=payload_size,
            brgs=brgs,
        )

    def on_receive(
        self, node: NodeContext, state: NodePacketState, packet: BroadcastPacket, now: float
    ) -> Decision:
        state.hear(node.position, packet.L2)
        # only the first copy designates, later copies never promote a node to BRG
        discard = _first_copy(state, packet, node.node_id)
        if discard is not None:
            return discard
        if node.node_id not in packet.brgs:
            return Discard(DiscardReason.NOT_DESIGNATED)

        one_hop, two_hop = neighbor_tables(node.hellos, now, self.params.stale_horizon)
        covered = {packet.sender}
        sender_record = node.hellos.get(packet.sender)
        if sender_record is not None and now - sender_record.timestamp <= self.params.stale_horizon:
            covered |= sender_record.neighbors
        brgs = ahbp_select_brgs(
            one_hop, two_hop, self_id=node.node_id, covered=covered, exclude={packet.sender}
        )
        return _transmit(state, packet, packet.L2, node.position, brgs=brgs)

    def make_hello(self, node: NodeContext, now: float) -> HelloPacket:
        return make_hello(node, now, self.params.stale_horizon)

    def on_hello(self, node: NodeContext, hello: HelloPacket, now: float) -> HelloRecord:
        return on_hello(node, hello, now)

    def header_size(self, packet: BroadcastPacket) -> int:
        return PACKET_ID.size + BRG_COUNT.size + BRG_ID.size * len(packet.brgs)

    def describe(self) -> str:
        return f"ahbp-style hello={self.params.hello_interval:g}s"
