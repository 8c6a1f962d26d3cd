"""
Deterministic discrete-event simulator running one broadcast per trial.

Events are processed in (time, sequence) order, the sequence number is handed
out when an event is scheduled. Every random draw comes from a stream keyed by
(seed, purpose, node), so a trial is bit reproducible for a fixed
(config, seed) pair.
"""

from dataclasses import asdict, dataclass, field, replace
from enum import Enum
import heapq
import itertools
import json
import logging
import math
from typing import Any, Iterable, Iterator, NamedTuple, Optional, Union

import numpy as np

from .config import Placement, ScenarioConfig
from .exceptions import ScenarioError, SimulationError
from .geometry import GEOMETRIC_EPSILON, Point, Region, RegionShape, ideal_lattice
from .mobility import MobilityState, step_mobility
from .packet import BroadcastPacket, HelloPacket, PacketId
from .protocol import Decision, Discard, NodeContext, NodePacketState, Schedule, Transmit
from .radio import PROPAGATION_DELAY, deliver, sample_sector_ranges
from .rng import StreamPurpose, TrialStreams

logger = logging.getLogger(__name__)


class EventKind(Enum):
    RECEPTION = "reception"
    TIMER_EXPIRY = "timer_expiry"
    HELLO_DUE = "hello_due"
    MOBILITY_TICK = "mobility_tick"
    ORIGINATE = "originate"


# kinds that keep a trial alive; hellos and mobility only run in the background
_DATA_KINDS = (EventKind.RECEPTION, EventKind.TIMER_EXPIRY, EventKind.ORIGINATE)


@dataclass(order=True, frozen=True)
class Event:
    time: float
    sequence: int
    kind: EventKind = field(compare=False)
    node: int = field(compare=False, default=-1)
    packet: Optional[Union[BroadcastPacket, HelloPacket]] = field(compare=False, default=None)
    transmitter_pos: Optional[Point] = field(compare=False, default=None)

    @property
    def is_data(self) -> bool:
        if self.kind is EventKind.RECEPTION:
            return isinstance(self.packet, BroadcastPacket)
        return self.kind in _DATA_KINDS


@dataclass(frozen=True)
class TrialMetrics:
    """
    Outcome of one trial. transmissions and delivered count the source.
    """

    transmissions: int
    delivered: int
    node_count: int
    control_packets: int = 0
    control_bytes: int = 0
    overhead_bytes: int = 0
    broadcast_latency: float = 0.0
    truncated: bool = False

    @property
    def retransmissions(self) -> int:
        return max(self.transmissions - 1, 0)

    @property
    def delivery_ratio(self) -> float:
        return self.delivered / self.node_count

    @property
    def retransmit_fraction(self) -> float:
        return self.transmissions / self.node_count

    def as_dict(self) -> dict[str, Any]:
        result = asdict(self)
        result["retransmissions"] = self.retransmissions
        result["delivery_ratio"] = self.delivery_ratio
        result["retransmit_fraction"] = self.retransmit_fraction
        return result


class NodePlacement(NamedTuple):
    nodes: list[tuple[int, Point]]
    source: int

    @property
    def positions(self) -> np.ndarray:
        return np.array([p.as_tuple() for _, p in self.nodes], dtype=float)


def _nearest_to(positions: np.ndarray, target: Point) -> int:
    distance = np.hypot(positions[:, 0] - target.x, positions[:, 1] - target.y)
    return int(np.argmin(distance))


def place_nodes(
    region: Region,
    density: Optional[float],
    R: float,
    rng: np.random.Generator,
    node_count: Optional[int] = None,
) -> NodePlacement:
    """
    Place nodes i.i.d. uniformly over the region
    :param region: simulation region
    :param density: nodes per R x R square
    :param R: transmission range
    :param rng: placement stream
    :param node_count: explicit node count, overrides density
    :return: NodePlacement, the source is the node nearest the region centre
    :raises ScenarioError: if fewer than two nodes would be placed
    """
    if node_count is None:
        if density is None or not density > 0:
            raise ScenarioError(f"density must be > 0, got {density}")
        node_count = round(density * region.area / R**2)
    if node_count < 2:
        raise ScenarioError(f"Scenario places {node_count} node(s), at least 2 are needed")

    if region.shape is RegionShape.CIRCLE:
        radius = region.radius * np.sqrt(rng.random(node_count))
        angle = rng.uniform(0.0, 2.0 * math.pi, node_count)
        xs = region.origin.x + radius * np.cos(angle)
        ys = region.origin.y + radius * np.sin(angle)
    else:
        xmin, ymin, xmax, ymax = region.bounds
        xs = rng.uniform(xmin, xmax, node_count)
        ys = rng.uniform(ymin, ymax, node_count)
    positions = np.column_stack((xs, ys))
    nodes = [(i, Point(float(x), float(y))) for i, (x, y) in enumerate(positions)]
    return NodePlacement(nodes=nodes, source=_nearest_to(positions, region.center))


def place_lattice(region: Region, R: float, margin: Optional[float] = None) -> NodePlacement:
    """
    One node on every strategic location, the source at the region centre
    """
    points = ideal_lattice(region, region.center, R, margin=margin)
    if len(points) < 2:
        raise ScenarioError(f"Ideal lattice for {region.describe()} holds only the source")
    return NodePlacement(nodes=list(enumerate(points)), source=0)


class EventLog:
    """
    In memory record of one trial, written out as JSON lines with sorted keys
    """

    def __init__(self):
        self.records: list[dict[str, Any]] = []

    def append(self, record: dict[str, Any]) -> None:
        self.records.append(record)

    def lines(self) -> Iterator[str]:
        for record in self.records:
            yield json.dumps(record, sort_keys=True) + "\n"

    def dumps(self) -> str:
        return "".join(self.lines())

    @staticmethod
    def parse(lines: Iterable[str]) -> list[dict[str, Any]]:
        return [json.loads(line) for line in lines if line.strip()]


class Simulator:
    """
    One trial of one scenario
    """

    def __init__(self, config: ScenarioConfig, seed: int, event_log: Optional[EventLog] = None):
        self.config = config
        self.seed = int(seed)
        self.event_log = event_log
        self.streams = TrialStreams(self.seed)
        self.protocol = config.build_protocol()
        self.radio = config.radio

        if config.placement is Placement.IDEAL:
            placement = place_lattice(config.region, config.R, margin=config.lattice_margin)
            # lattice neighbours sit at R up to rounding
            self.range_tolerance = GEOMETRIC_EPSILON
        else:
            self.range_tolerance = 0.0
            placement = place_nodes(
                config.region,
                config.density,
                config.R,
                self.streams.get(StreamPurpose.PLACEMENT),
                node_count=config.node_count,
            )
        self.positions = placement.positions
        self.source = placement.source
        self.node_count = len(self.positions)

        self.ranges = [
            sample_sector_ranges(self.radio, self.streams.get(StreamPurpose.RADIO, node))
            for node in range(self.node_count)
        ]
        self.contexts = [
            NodeContext(
                node_id=node,
                position=Point(*self.positions[node]),
                rng=self.streams.get(StreamPurpose.PROTOCOL, node),
                neighbor_count=self._neighbor_counter(node),
            )
            for node in range(self.node_count)
        ]
        self.mobility: Optional[MobilityState] = None
        if not config.mobility.is_static:
            self.mobility = MobilityState.start(
                config.mobility,
                config.region,
                [self.streams.get(StreamPurpose.MOBILITY, node) for node in range(self.node_count)],
            )

        self.states: dict[PacketId, list[NodePacketState]] = {}
        self.now = 0.0
        self.origin_time: Optional[float] = None
        self._queue: list[Event] = []
        self._sequence = itertools.count()
        self._data_events = 0

        self.transmissions = 0
        self.delivered = 0
        self.control_packets = 0
        self.control_bytes = 0
        self.overhead_bytes = 0
        self.last_delivery = 0.0
        self.truncated = False
        self.transmitters: list[int] = []

    def _neighbor_counter(self, node: int):
        def count() -> int:
            delta = self.positions - self.positions[node]
            within = np.hypot(delta[:, 0], delta[:, 1]) <= self.config.R
            return int(np.count_nonzero(within)) - 1

        return count

    def schedule(self, time: float, kind: EventKind, node: int = -1, packet=None, transmitter_pos=None) -> Event:
        event = Event(
            time=time,
            sequence=next(self._sequence),
            kind=kind,
            node=node,
            packet=packet,
            transmitter_pos=transmitter_pos,
        )
        if event.is_data:
            self._data_events += 1
        heapq.heappush(self._queue, event)
        return event

    def _log(self, record: dict[str, Any]) -> None:
        if self.event_log is not None:
            self.event_log.append(record)

    def _log_event(self, event: Event) -> None:
        if self.event_log is None:
            return
        packet_id = event.packet.packet_id if isinstance(event.packet, BroadcastPacket) else None
        x, y = (None, None) if event.node < 0 else self.positions[event.node]
        self._log(
            {
                "record": "event",
                "time": event.time,
                "kind": event.kind.value,
                "node": event.node,
                "packet": None if packet_id is None else str(packet_id),
                "x": None if x is None else float(x),
                "y": None if y is None else float(y),
            }
        )

    def run(self) -> TrialMetrics:
        """
        Run the trial to completion or to the time cap
        """
        warmup = 0.0
        if self.protocol.uses_hello:
            interval = self.protocol.hello_interval
            warmup = 2.0 * interval
            for node in range(self.node_count):
                first = self.streams.get(StreamPurpose.HELLO, node).uniform(0.0, interval)
                self.schedule(first, EventKind.HELLO_DUE, node=node)
        if self.mobility is not None:
            self.schedule(self.config.mobility.tick, EventKind.MOBILITY_TICK)
        self.schedule(warmup, EventKind.ORIGINATE, node=self.source)
        cap = warmup + self.config.time_cap

        self._log(
            {
                "record": "trial",
                "R": self.config.R,
                "protocol": self.protocol.describe(),
                "seed": self.seed,
                "n": self.node_count,
                "source": self.source,
            }
        )

        while self._queue and self._data_events > 0:
            if self._queue[0].time > cap:
                self.truncated = True
                logger.warning(
                    f"Trial {self.config.name} seed {self.seed} truncated at {cap:g}s "
                    f"with {self._data_events} pending data events"
                )
                break
            event = heapq.heappop(self._queue)
            if event.is_data:
                self._data_events -= 1
            self.now = event.time
            self._log_event(event)
            self._dispatch(event)

        return self.metrics()

    def _dispatch(self, event: Event) -> None:
        match event.kind:
            case EventKind.ORIGINATE:
                self._originate(event.node)
            case EventKind.RECEPTION if isinstance(event.packet, HelloPacket):
                self.protocol.on_hello(self.contexts[event.node], event.packet, self.now)
            case EventKind.RECEPTION:
                self._receive(event)
            case EventKind.TIMER_EXPIRY:
                state = self._state(event.packet.packet_id, event.node)
                decision = self.protocol.on_timer(self.contexts[event.node], state, event.packet, self.now)
                self._apply(event.node, event.packet, decision)
            case EventKind.HELLO_DUE:
                self._hello(event.node)
            case EventKind.MOBILITY_TICK:
                self._move()
            case _:
                raise SimulationError(f"Unhandled event {event}")

    def _state(self, packet_id: PacketId, node: int) -> NodePacketState:
        states = self.states.get(packet_id)
        if states is None:
            states = [NodePacketState() for _ in range(self.node_count)]
            self.states[packet_id] = states
        if not 0 <= node < self.node_count:
            raise SimulationError(f"Event for unknown node {node}")
        return states[node]

    def _originate(self, node: int) -> None:
        context = self.contexts[node]
        packet = self.protocol.originate(context, now=self.now, payload_size=self.config.payload_size)
        self.origin_time = self.now
        self._state(packet.packet_id, node).mark_originated()
        self.delivered += 1
        logger.debug(f"Node {node} originates {packet.packet_id} at {self.now:g}s")
        self._transmit(node, packet)

    def _receive(self, event: Event) -> None:
        packet: BroadcastPacket = event.packet
        state = self._state(packet.packet_id, event.node)
        if not state.received:
            self.delivered += 1
            self.last_delivery = self.now
        decision = self.protocol.on_receive(self.contexts[event.node], state, packet, self.now)
        self._apply(event.node, packet, decision)

    def _apply(self, node: int, packet: BroadcastPacket, decision: Decision) -> None:
        match decision:
            case Transmit(packet=outgoing):
                self._transmit(node, outgoing)
            case Schedule(delay=delay, candidate=candidate):
                state = self._state(packet.packet_id, node)
                self.schedule(state.pending_at, EventKind.TIMER_EXPIRY, node=node, packet=packet)
                if self.event_log is not None:
                    record = {"record": "schedule", "time": self.now, "node": node, "delay": delay}
                    if candidate is not None:
                        record["l"] = candidate.distance_from_node
                    self._log(record)
            case Discard(reason=reason):
                if self.event_log is not None:
                    self._log({"record": "discard", "time": self.now, "node": node, "reason": reason.value})

    def _transmit(self, node: int, packet: BroadcastPacket) -> None:
        packet = replace(packet, sender=node)
        self.transmissions += 1
        self.transmitters.append(node)
        self.overhead_bytes += self.protocol.header_size(packet)
        transmitter_pos = Point(*self.positions[node])
        delivery = deliver(
            node,
            self.radio,
            self.positions,
            self.ranges[node],
            self.streams.get(StreamPurpose.ERROR, node),
            self.now,
            tolerance=self.range_tolerance,
        )
        self._log(
            {
                "record": "transmit",
                "time": self.now,
                "node": node,
                "packet": str(packet.packet_id),
                "l1x": packet.L1.x,
                "l1y": packet.L1.y,
                "l2x": packet.L2.x,
                "l2y": packet.L2.y,
                "receivers": [int(r) for r in delivery.receivers],
            }
        )
        for receiver in delivery.receivers:
            self.schedule(delivery.time, EventKind.RECEPTION, node=int(receiver), packet=packet, transmitter_pos=transmitter_pos)

    def _hello(self, node: int) -> None:
        context = self.contexts[node]
        hello = self.protocol.make_hello(context, self.now)
        self.control_packets += 1
        self.control_bytes += hello.header_size
        delivery = deliver(
            node,
            self.radio,
            self.positions,
            self.ranges[node],
            self.streams.get(StreamPurpose.HELLO_ERROR, node),
            self.now,
            tolerance=self.range_tolerance,
        )
        for receiver in delivery.receivers:
            self.schedule(delivery.time, EventKind.RECEPTION, node=int(receiver), packet=hello)
        self.schedule(self.now + self.protocol.hello_interval, EventKind.HELLO_DUE, node=node)

    def _move(self) -> None:
        # positions hold between ticks, off by at most tick * max_speed
        model = self.config.mobility
        self.positions = step_mobility(model, self.mobility, self.positions, model.tick)
        for node, context in enumerate(self.contexts):
            context.position = Point(*self.positions[node])
        self.schedule(self.now + model.tick, EventKind.MOBILITY_TICK)

    def hello_position_error(self) -> float:
        """
        Largest distance between a position learnt from a hello and the true
        position of that neighbour now
        """
        worst = 0.0
        for context in self.contexts:
            for neighbor, record in context.hellos.items():
                worst = max(worst, record.position.distance_to(self.contexts[neighbor].position))
        return worst

    def metrics(self) -> TrialMetrics:
        latency = 0.0
        if self.origin_time is not None and self.delivered > 1:
            latency = self.last_delivery - self.origin_time
        return TrialMetrics(
            transmissions=self.transmissions,
            delivered=self.delivered,
            node_count=self.node_count,
            control_packets=self.control_packets,
            control_bytes=self.control_bytes,
            overhead_bytes=self.overhead_bytes,
            broadcast_latency=latency,
            truncated=self.truncated,
        )


def run_trial(config: ScenarioConfig, seed: int, event_log: Optional[EventLog] = None) -> TrialMetrics:
    """
    Run one trial
    :param config: scenario
    :param seed: trial seed
    :param event_log: filled with the trial records when given
    :return: TrialMetrics
    """
    metrics = Simulator(config, seed, event_log=event_log).run()
    logger.debug(
        f"{config.name} seed {seed}: {metrics.transmissions} transmissions, "
        f"delivery {metrics.delivery_ratio:.3f}"
    )
    return metrics


def _transmit_records(records: Iterable[dict[str, Any]]) -> list[dict[str, Any]]:
    return [r for r in records if r.get("record") == "transmit"]


def verify_single_transmission(records: Iterable[dict[str, Any]]) -> list[tuple[int, str]]:
    """
    Nodes that transmitted a packet more than once
    :return: (node, packet) pairs, empty if every node sent each packet at most once
    """
    seen: set[tuple[int, str]] = set()
    repeated: list[tuple[int, str]] = []
    for record in _transmit_records(records):
        key = (record["node"], record["packet"])
        if key in seen:
            repeated.append(key)
        seen.add(key)
    return repeated


def verify_suppression(records: Iterable[dict[str, Any]], min_distance: float) -> list[tuple[int, int]]:
    """
    Transmitters that went ahead although they had already heard a transmitter
    of the same packet closer than min_distance. A copy counts as heard once its
    reception time has passed.
    :return: (earlier, later) transmitter pairs in violation
    """
    violations: list[tuple[int, int]] = []
    heard: dict[tuple[int, str], list[tuple[int, float, float, float]]] = {}
    for record in _transmit_records(records):
        node, packet = record["node"], record["packet"]
        for earlier, x, y, received in heard.get((node, packet), []):
            if received < record["time"] and math.hypot(record["l2x"] - x, record["l2y"] - y) < min_distance:
                violations.append((earlier, node))
        for receiver in record["receivers"]:
            heard.setdefault((receiver, packet), []).append(
                (node, record["l2x"], record["l2y"], record["time"] + PROPAGATION_DELAY)
            )
    return violations
