"""
Independent random streams per (trial seed, purpose, node).
Adding a node or a draw in one stream never shifts another stream.
"""

from enum import IntEnum
import logging

import numpy as np

logger = logging.getLogger(__name__)

# stream key for draws that belong to the trial rather than to one node
TRIAL_STREAM = 0xFFFFFFFF


class StreamPurpose(IntEnum):
    PLACEMENT = 1
    MOBILITY = 2
    RADIO = 3
    ERROR = 4
    PROTOCOL = 5
    HELLO = 6
    HELLO_ERROR = 7


def stream(seed: int, purpose: StreamPurpose, node: int = TRIAL_STREAM) -> np.random.Generator:
    """
    Generator for one purpose of one node in one trial
    :param seed: trial seed, >= 0
    :param purpose: what the draws are used for
    :param node: node id, TRIAL_STREAM for trial wide draws
    :return: numpy Generator
    """
    sequence = np.random.SeedSequence(entropy=int(seed), spawn_key=(int(purpose), int(node)))
    return np.random.Generator(np.random.PCG64(sequence))


class TrialStreams:
    """
    Lazily created node streams of one trial
    """

    def __init__(self, seed: int):
        self.seed = int(seed)
        self._streams: dict[tuple[StreamPurpose, int], np.random.Generator] = {}

    def get(self, purpose: StreamPurpose, node: int = TRIAL_STREAM) -> np.random.Generator:
        key = (purpose, node)
        generator = self._streams.get(key)
        if generator is None:
            generator = stream(self.seed, purpose, node)
            self._streams[key] = generator
        return generator
