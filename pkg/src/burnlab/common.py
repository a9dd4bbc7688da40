"""Shared helpers: seeded substreams, confidence conventions, evaluation records."""

from __future__ import annotations

import zlib
from dataclasses import dataclass

import numpy as np

VERSION = "0.1.0"

# 99% two-sided normal quantile used for every Monte Carlo interval in the package.
Z99 = 2.58

# Minimum replicate count for any Monte Carlo estimate.
MIN_REPLICATES = 30


def substream(seed: int, *keys) -> np.random.Generator:
    """Deterministic child generator for (seed, keys).

    String keys are hashed with crc32 so stream identities survive across runs
    and platforms. Integer keys pass through unchanged.
    """
    parts = [int(seed)]
    for k in keys:
        if isinstance(k, str):
            parts.append(zlib.crc32(k.encode("utf-8")))
        else:
            parts.append(int(k))
    return np.random.default_rng(parts)


@dataclass(frozen=True)
class MechanismEval:
    """Expected residual surplus with interval and provenance.

    mode is "exact" (ci_halfwidth 0) or "mc" (99% normal interval).
    replicates records the enumeration or sample size that produced the mean.
    """

    mean: float
    ci_halfwidth: float
    mode: str
    replicates: int
    seed: int | None = None

    def __post_init__(self):
        if self.mode not in ("exact", "mc"):
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.mode == "exact" and self.ci_halfwidth != 0.0:
            raise ValueError("exact mode must report a zero interval")

    @property
    def ci(self) -> tuple[float, float]:
        return (self.mean - self.ci_halfwidth, self.mean + self.ci_halfwidth)


def mc_eval(samples: np.ndarray, seed: int | None) -> MechanismEval:
    """Summarize per-replicate values into a Monte Carlo MechanismEval."""
    samples = np.asarray(samples, dtype=float)
    n = samples.size
    if n < MIN_REPLICATES:
        raise ValueError(f"need at least {MIN_REPLICATES} replicates, got {n}")
    se = float(samples.std(ddof=1)) / float(np.sqrt(n))
    return MechanismEval(float(samples.mean()), Z99 * se, "mc", n, seed)
