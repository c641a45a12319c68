"""Reproducible random streams.

All randomness uses numpy's PCG64 bit generator. A task's stream is seeded
with the first 8 bytes (little endian) of SHA-256 over the UTF-8 string
``"<master_seed>:<task_key>"``, so streams depend only on the master seed
and the task's identity, never on scheduling order or platform.
"""
from __future__ import annotations

import hashlib

import numpy as np
from numpy.random import PCG64, Generator


def generator(seed: int) -> Generator:
    return Generator(PCG64(seed))


def derive_seed(master_seed: int, task_key: str | int) -> int:
    digest = hashlib.sha256(f"{master_seed}:{task_key}".encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little")


def task_generator(master_seed: int, task_key: str | int) -> Generator:
    return generator(derive_seed(master_seed, task_key))
