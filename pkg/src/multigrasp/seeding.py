"""Seed derivation.

Every random stream is derived from one base seed and a tuple of integer or
string keys, so independent pieces of work (restarts, opposition-space
candidates, campaign trials, greedy orders) draw from non-overlapping streams
regardless of execution order.

Streams used across the package:

* ``("os", k)``: solver restarts for the ``k``-th candidate of one grasp
* ``("draw", trial)``: objects drawn for a campaign trial
* ``("pick", trial, step)``: random opposition-space choice in one step
* ``("step", step)``: solver seeds for one planning step
* ``("order", index)``: one greedy permutation
"""
from __future__ import annotations

import zlib

import numpy as np


def _key(k) -> int:
    if isinstance(k, str):
        return zlib.crc32(k.encode())
    return int(k) & 0xFFFFFFFF


def derive_seed(seed, *keys) -> int:
    words = [_key(seed)] + [_key(k) for k in keys]
    return int(np.random.SeedSequence(words).generate_state(1)[0])


def derive_rng(seed, *keys) -> np.random.Generator:
    return np.random.default_rng(derive_seed(seed, *keys))
