#!/usr/bin/env python3
"""Recompute and rewrite the fnv1a64 checksum line of a PESQ table file."""
import sys

FNV_OFFSET = 0xCBF29CE484222325
FNV_PRIME = 0x100000001B3


def fnv1a64(data: bytes) -> int:
    h = FNV_OFFSET
    for b in data:
        h ^= b
        h = (h * FNV_PRIME) & 0xFFFFFFFFFFFFFFFF
    return h


def main(path: str) -> None:
    text = open(path, encoding="ascii").read()
    marker = "[checksum]\n"
    body = text.split(marker, 1)[0]
    digest = fnv1a64(body.encode("ascii"))
    with open(path, "w", encoding="ascii") as f:
        f.write(body + marker + "fnv1a64 %016x\n" % digest)
    print("%016x" % digest)


if __name__ == "__main__":
    main(sys.argv[1])
