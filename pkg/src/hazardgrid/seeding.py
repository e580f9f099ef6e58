"""Order-independent seed derivation.

A child seed is the first 8 bytes (little endian) of the BLAKE2b digest of
the parts rendered with ``repr`` and joined by ``"/"``. Integers (numpy or
builtin) and enum members are normalised first so equal tuples always give
equal seeds, whatever process or order they are computed in.
"""
import enum
import hashlib
import numbers


def _canonical(part) -> str:
    if isinstance(part, enum.Enum):
        part = part.value
    if isinstance(part, numbers.Integral) and not isinstance(part, bool):
        return repr(int(part))
    return repr(part)


def child_seed(*parts) -> int:
    text = "/".join(_canonical(p) for p in parts)
    digest = hashlib.blake2b(text.encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "little")
