"""Set-associative LRU tag store shared by the L1-D, TLBs and MMU caches."""
from __future__ import annotations

from collections import OrderedDict

from .errors import ConfigError

FULL = 0  # ways == FULL means fully associative


class SetAssocLRU:
    """Tags only; set index is ``key % sets``.  Each set keeps MRU last."""

    def __init__(self, entries: int, ways: int = FULL):
        if entries < 1:
            raise ConfigError("cache needs at least one entry")
        ways = entries if ways in (FULL, None) else ways
        if entries % ways:
            raise ConfigError(f"{entries} entries not divisible by {ways} ways")
        self.entries = entries
        self.ways = ways
        self.nsets = entries // ways
        self._big = ways > 16
        if self._big:
            self._sets = [OrderedDict() for _ in range(self.nsets)]
        else:
            self._sets = [[] for _ in range(self.nsets)]

    def probe(self, key: int) -> bool:
        """Hit test that refreshes recency on a hit and never allocates."""
        s = self._sets[key % self.nsets]
        if self._big:
            if key in s:
                s.move_to_end(key)
                return True
            return False
        if key in s:
            if s[-1] != key:
                s.remove(key)
                s.append(key)
            return True
        return False

    def fill(self, key: int):
        """Insert ``key`` as MRU; returns the evicted tag or ``None``."""
        s = self._sets[key % self.nsets]
        victim = None
        if self._big:
            if key in s:
                s.move_to_end(key)
                return None
            if len(s) >= self.ways:
                victim, _ = s.popitem(last=False)
            s[key] = None
            return victim
        if key in s:
            s.remove(key)
        elif len(s) >= self.ways:
            victim = s.pop(0)
        s.append(key)
        return victim

    def access(self, key: int) -> bool:
        """Probe and allocate on miss.  Returns True on hit."""
        if self.probe(key):
            return True
        self.fill(key)
        return False

    def invalidate(self, key: int) -> bool:
        s = self._sets[key % self.nsets]
        if key not in s:
            return False
        if self._big:
            del s[key]
        else:
            s.remove(key)
        return True

    def __contains__(self, key: int) -> bool:
        return key in self._sets[key % self.nsets]

    def clear(self) -> None:
        for s in self._sets:
            s.clear()
