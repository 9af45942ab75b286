"""Spin configurations grouped by excitation number.

Configurations are tuples of 0/1 with site 1 first.  Inside a sector they are
ordered by ascending binary value, reading site 1 as the most significant bit.
The extended receiver (last four sites) uses its own fixed 11-state order.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations
from math import comb

MAX_EXCITATIONS = 2

# Order of the 4-site extended-receiver basis; generator indices 1..11 refer to it.
ER_ORDER: tuple[tuple[int, ...], ...] = tuple(
    tuple(int(ch) for ch in s)
    for s in (
        "0000", "0001", "0010", "0011", "0100", "0101",
        "0110", "1000", "1001", "1010", "1100",
    )
)
ER_INDEX = {cfg: i for i, cfg in enumerate(ER_ORDER)}


class BasisError(ValueError):
    pass


def _check_bits(bits) -> tuple[int, ...]:
    bits = tuple(int(b) for b in bits)
    if any(b not in (0, 1) for b in bits):
        raise BasisError(f"bits must be 0 or 1, got {bits}")
    return bits


@dataclass(frozen=True)
class Configuration:
    """Occupation pattern of a chain; ``bits[0]`` is site 1."""

    bits: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "bits", _check_bits(self.bits))

    @classmethod
    def from_string(cls, s: str) -> "Configuration":
        if not s or set(s) - {"0", "1"}:
            raise BasisError(f"configuration string must be made of 0 and 1, got {s!r}")
        return cls(tuple(int(ch) for ch in s))

    @property
    def excitations(self) -> int:
        return sum(self.bits)

    @property
    def n_sites(self) -> int:
        return len(self.bits)

    def __str__(self) -> str:
        return "".join(str(b) for b in self.bits)


def enumerate_sector(n_sites: int, k: int) -> list[Configuration]:
    """All ``n_sites``-bit configurations with ``k`` excitations, ascending binary order."""
    if not isinstance(n_sites, int) or n_sites < 2:
        raise BasisError(f"n_sites must be an integer >= 2, got {n_sites!r}")
    if k not in range(MAX_EXCITATIONS + 1) or k > n_sites:
        raise BasisError(f"excitation count must be in 0..{MAX_EXCITATIONS}, got {k!r}")
    out = []
    for sites in combinations(range(n_sites), k):
        bits = [0] * n_sites
        for s in sites:
            bits[s] = 1
        out.append(Configuration(tuple(bits)))
    out.sort(key=lambda c: int(str(c), 2))
    return out


def split_tail(config: Configuration, tail_len: int) -> tuple[Configuration, Configuration]:
    """Split into the leading ``n - tail_len`` sites and the trailing ``tail_len`` sites."""
    if tail_len < 1 or tail_len > config.n_sites:
        raise BasisError(f"tail_len must be in 1..{config.n_sites}, got {tail_len}")
    cut = config.n_sites - tail_len
    return Configuration(config.bits[:cut]), Configuration(config.bits[cut:])


@dataclass(frozen=True)
class BasisCatalog:
    """Sector bases of an ``n_sites`` chain restricted to at most two excitations."""

    n_sites: int
    sectors: tuple[tuple[Configuration, ...], ...] = field(init=False, repr=False)
    _index: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        sectors = tuple(tuple(enumerate_sector(self.n_sites, k)) for k in range(MAX_EXCITATIONS + 1))
        index = {}
        for k, sector in enumerate(sectors):
            for off, cfg in enumerate(sector):
                index[cfg.bits] = (k, off)
        object.__setattr__(self, "sectors", sectors)
        object.__setattr__(self, "_index", index)

    @property
    def er_order(self) -> tuple[Configuration, ...]:
        return tuple(Configuration(b) for b in ER_ORDER)

    @property
    def dims(self) -> tuple[int, ...]:
        return tuple(len(s) for s in self.sectors)

    def index_of(self, config) -> tuple[int, int]:
        """(sector, offset) of a configuration; accepts a Configuration, tuple or bit string."""
        if isinstance(config, str):
            config = Configuration.from_string(config)
        elif not isinstance(config, Configuration):
            config = Configuration(tuple(config))
        if config.n_sites != self.n_sites:
            raise BasisError(f"expected {self.n_sites} sites, got {config.n_sites}")
        if config.excitations > MAX_EXCITATIONS:
            raise BasisError(
                f"{config} has {config.excitations} excitations; only sectors 0..{MAX_EXCITATIONS} are tracked"
            )
        return self._index[config.bits]

    def offset(self, bits: str) -> int:
        """Offset within its sector of a configuration given as a bit string."""
        return self.index_of(bits)[1]


def sector_dims(n_sites: int) -> tuple[int, int, int]:
    return tuple(comb(n_sites, k) for k in range(MAX_EXCITATIONS + 1))
