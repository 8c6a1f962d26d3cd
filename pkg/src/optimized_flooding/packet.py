"""
Broadcast and hello packets, and the byte layout of their headers.
Header sizes feed the bandwidth overhead metrics.
"""

from dataclasses import dataclass, field, replace
from enum import Enum
import logging
import struct
from typing import NamedTuple, Optional

from .exceptions import OutOfRange
from .geometry import Point

logger = logging.getLogger(__name__)

# <ORIGIN u32><SEQ u32>
PACKET_ID = struct.Struct(">II")

# <ORIGIN u32><SEQ u32><L1.x f64><L1.y f64><L2.x f64><L2.y f64><STAGE u8>
OFP_HEADER = struct.Struct(">II4dB")
OFP_HEADER_SIZE = OFP_HEADER.size  # 41 bytes

# AHBP appends <COUNT u16> then one u32 per designated relay
BRG_COUNT = struct.Struct(">H")
BRG_ID = struct.Struct(">I")

# <ID u32><X f64><Y f64><COUNT u16> then one u32 per neighbour
HELLO_HEADER = struct.Struct(">I2dH")


class HopStage(Enum):
    """
    How far the transmitter of a copy is from the source.
    A source neighbour relays outward from the source hexagon, later relays
    use the two forward lattice neighbours.
    """

    SOURCE = 0
    SOURCE_NEIGHBOR = 1
    RELAY = 2


class PacketId(NamedTuple):
    origin: int
    seq: int

    def __str__(self):
        return f"{self.origin}:{self.seq}"


@dataclass(frozen=True)
class BroadcastPacket:
    """
    Broadcast data packet with the two location header fields.
    L2 is the location of the transmitter, L1 the location of the node the
    transmitter received the packet from. The source sets both to its own location.
    """

    packet_id: PacketId
    L1: Point
    L2: Point
    stage: HopStage = HopStage.RELAY
    payload_size: int = 0
    brgs: frozenset[int] = field(default_factory=frozenset)
    # link layer source address, stamped by the simulator on transmission
    sender: int = -1

    @property
    def hop_from_source(self) -> bool:
        return self.stage is HopStage.SOURCE

    def relayed(self, upstream: Point, own: Point, brgs: Optional[frozenset[int]] = None) -> "BroadcastPacket":
        """
        Copy of this packet as rebroadcast by a relay
        :param upstream: location of the node the relay received the packet from
        :param own: relay location
        :param brgs: designated relays for AHBP, keeps the template value if None
        :return: new packet
        """
        return replace(
            self,
            L1=upstream,
            L2=own,
            stage=HopStage.SOURCE_NEIGHBOR if self.stage is HopStage.SOURCE else HopStage.RELAY,
            brgs=self.brgs if brgs is None else frozenset(brgs),
        )

    def encode_header(self) -> bytes:
        """
        Encode the location header, followed by the BRG list when present
        :return: header bytes
        """
        try:
            out_buff = bytearray(
                OFP_HEADER.pack(
                    self.packet_id.origin,
                    self.packet_id.seq,
                    self.L1.x,
                    self.L1.y,
                    self.L2.x,
                    self.L2.y,
                    self.stage.value,
                )
            )
        except struct.error as e:
            raise OutOfRange(f"Packet id does not fit the header. {e}")
        if self.brgs:
            out_buff.extend(BRG_COUNT.pack(len(self.brgs)))
            for brg in sorted(self.brgs):
                out_buff.extend(BRG_ID.pack(brg))
        return bytes(out_buff)

    @classmethod
    def decode_header(cls, buff: bytes, with_brgs: bool = False) -> "BroadcastPacket":
        """
        Parse a header produced by encode_header
        :param buff: header bytes
        :param with_brgs: a BRG list follows the location fields
        :return: packet with payload_size 0
        :raises EOFError: if the buffer is shorter than the header
        :raises OutOfRange: if the stage byte is unknown
        """
        if buff is None or len(buff) < OFP_HEADER_SIZE:
            raise EOFError("Header is not complete.")
        origin, seq, l1x, l1y, l2x, l2y, stage = OFP_HEADER.unpack_from(buff, 0)
        try:
            hop_stage = HopStage(stage)
        except ValueError:
            raise OutOfRange(f"Unknown hop stage {stage}")
        brgs: frozenset[int] = frozenset()
        if with_brgs:
            offset = OFP_HEADER_SIZE
            if len(buff) < offset + BRG_COUNT.size:
                raise EOFError("Missing BRG count.")
            (count,) = BRG_COUNT.unpack_from(buff, offset)
            offset += BRG_COUNT.size
            if len(buff) < offset + count * BRG_ID.size:
                raise EOFError("BRG list is not complete.")
            brgs = frozenset(
                BRG_ID.unpack_from(buff, offset + i * BRG_ID.size)[0] for i in range(count)
            )
        return cls(
            packet_id=PacketId(origin, seq),
            L1=Point(l1x, l1y),
            L2=Point(l2x, l2y),
            stage=hop_stage,
            brgs=brgs,
        )


@dataclass(frozen=True)
class HelloPacket:
    """
    Periodic beacon with the sender identity, position and known neighbours
    """

    sender: int
    position: Point
    neighbors: frozenset[int]

    @property
    def header_size(self) -> int:
        return HELLO_HEADER.size + BRG_ID.size * len(self.neighbors)

    def encode(self) -> bytes:
        out_buff = bytearray(
            HELLO_HEADER.pack(self.sender, self.position.x, self.position.y, len(self.neighbors))
        )
        for neighbor in sorted(self.neighbors):
            out_buff.extend(BRG_ID.pack(neighbor))
        return bytes(out_buff)

    @classmethod
    def decode(cls, buff: bytes) -> "HelloPacket":
        if buff is None or len(buff) < HELLO_HEADER.size:
            raise EOFError("Hello is not complete.")
        sender, x, y, count = HELLO_HEADER.unpack_from(buff, 0)
        if len(buff) < HELLO_HEADER.size + count * BRG_ID.size:
            raise EOFError("Hello neighbour list is not complete.")
        neighbors = frozenset(
            BRG_ID.unpack_from(buff, HELLO_HEADER.size + i * BRG_ID.size)[0] for i in range(count)
        )
        return cls(sender=sender, position=Point(x, y), neighbors=neighbors)
