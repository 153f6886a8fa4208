"""Deterministic random streams on top of the counter-based Philox generator.

A :class:`Stream` is a value, not a mutable generator: the same stream always
yields the same draws, and child streams are addressed by ``(seed, path)``.
Monte Carlo code derives one child per trial index, so results never depend
on how trials are split across chunks or workers.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class Stream:
    """Value-like handle for a reproducible random source."""

    seed: int
    path: tuple[int, ...] = ()

    def __post_init__(self) -> None:
        if not isinstance(self.seed, int) or self.seed < 0:
            raise ValueError(f"seed must be a nonnegative integer, got {self.seed!r}")
        if any(i < 0 for i in self.path):
            raise ValueError(f"stream path indices must be nonnegative, got {self.path!r}")

    def child(self, *indices: int) -> "Stream":
        """Derive the independent stream addressed by ``indices`` under this one."""
        return Stream(self.seed, self.path + indices)

    def generator(self) -> np.random.Generator:
        """Fresh numpy generator keyed by (seed, path); same key, same draws."""
        ss = np.random.SeedSequence(entropy=self.seed, spawn_key=self.path)
        return np.random.Generator(np.random.Philox(ss))


def as_generator(rng: "Stream | np.random.Generator") -> np.random.Generator:
    """Accept either a Stream or an already-built numpy generator."""
    if isinstance(rng, Stream):
        return rng.generator()
    if isinstance(rng, np.random.Generator):
        return rng
    raise TypeError(f"expected Stream or numpy Generator, got {type(rng).__name__}")
