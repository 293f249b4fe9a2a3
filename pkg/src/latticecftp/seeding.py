"""Stateless seed derivation.

Every random stream in the package is derived by pure arithmetic on
(base seed, integer labels), never by consuming a shared generator, so the
result of any computation is independent of scheduling and query order.
"""

from __future__ import annotations

_MASK64 = (1 << 64) - 1


def splitmix64(x: int) -> int:
    """One step of the splitmix64 mixer (public-domain constants)."""
    x = (x + 0x9E3779B97F4A7C15) & _MASK64
    z = x
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return (z ^ (z >> 31)) & _MASK64


def mix(*parts: int) -> int:
    """Fold integers into a single 64-bit seed, order-sensitively."""
    acc = 0x243F6A8885A308D3  # arbitrary non-zero start
    for p in parts:
        acc = splitmix64((acc ^ (p & _MASK64)) & _MASK64)
    return acc


def derive_seed(base: int, index: int) -> int:
    """Seed for the ``index``-th replicate of a batch rooted at ``base``."""
    return mix(base, index)


def site_spawn_key(site: tuple[int, ...], salt: int | None = None) -> tuple[int, ...]:
    """Encode lattice coordinates as a tuple of uint32 words.

    Two's-complement split keeps negative coordinates distinct; an optional
    salt yields an independent stream family for the same site.
    """
    words = []
    for c in site:
        c64 = c & _MASK64
        words.append(c64 & 0xFFFFFFFF)
        words.append(c64 >> 32)
    if salt is not None:
        words.append(salt & 0xFFFFFFFF)
        words.append((salt >> 32) & 0xFFFFFFFF)
    return tuple(words)


def site_hash(seed: int, site: tuple[int, ...]) -> int:
    """Deterministic 64-bit hash of (seed, site), for keyed random fields."""
    return mix(seed, len(site), *site)
