"""Tagless last-way predictor, one per vault."""
from __future__ import annotations

from .errors import ConfigError


def xor_fold(bits: int, width: int) -> int:
    """XOR together ``width``-bit chunks of ``bits``, starting from the LSB."""
    if width <= 0:
        return 0
    mask = (1 << width) - 1
    out = 0
    while bits:
        out ^= bits & mask
        bits >>= width
    return out


class WayPredictor:
    """``2**index_bits`` entries, each remembering the last way hit at that index."""

    def __init__(self, index_bits: int = 10, associativity: int = 4):
        if index_bits < 0:
            raise ConfigError("index_bits must be non-negative")
        if associativity < 1 or associativity & (associativity - 1):
            raise ConfigError("associativity must be a power of two")
        self.index_bits = index_bits
        self.associativity = associativity
        self.entries = [0] * (1 << index_bits)

    @property
    def way_bits(self) -> int:
        return self.associativity.bit_length() - 1

    @property
    def storage_bits(self) -> int:
        return len(self.entries) * self.way_bits

    @property
    def storage_bytes(self) -> float:
        return self.storage_bits / 8

    def index(self, set_bits: int) -> int:
        return xor_fold(set_bits, self.index_bits)

    def predict(self, set_bits: int) -> int:
        return self.entries[xor_fold(set_bits, self.index_bits)]

    def update(self, set_bits: int, actual_way: int) -> None:
        if not 0 <= actual_way < self.associativity:
            raise ConfigError(f"way {actual_way} outside 0..{self.associativity - 1}")
        self.entries[xor_fold(set_bits, self.index_bits)] = actual_way
