"""Seeded samplers for utility laws on [0, 1] and the reversed exponential.

Every draw comes from a Philox generator keyed by ``(seed, stream_id)``
through ``numpy.random.SeedSequence``; distinct stream ids give independent
streams and the same pair reproduces the same draws.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import stats

MAX_U64 = 2**64 - 1


@dataclass(frozen=True)
class Seed:
    seed: int = 0
    stream_id: int = 0

    def __post_init__(self):
        for name in ("seed", "stream_id"):
            v = getattr(self, name)
            if not 0 <= int(v) <= MAX_U64:
                raise ValueError(f"{name} must be an unsigned 64-bit integer, got {v}")

    def generator(self) -> np.random.Generator:
        ss = np.random.SeedSequence(int(self.seed), spawn_key=(int(self.stream_id),))
        return np.random.Generator(np.random.Philox(ss))

    def substream(self, stream_id: int) -> "Seed":
        return Seed(self.seed, stream_id)


def as_generator(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    if isinstance(seed, Seed):
        return seed.generator()
    return Seed(int(seed)).generator()


@dataclass(frozen=True)
class Uniform01:
    def sample(self, rng: np.random.Generator, shape) -> np.ndarray:
        return rng.random(shape)

    def to_dict(self) -> dict:
        return {"kind": "uniform01"}

    @property
    def pdf_bounds(self) -> tuple[float, float]:
        return 1.0, 1.0


@dataclass(frozen=True)
class PdfBounded:
    """Law on [0, 1] with density in ``[alpha, beta]``, sampled by a tabulated inverse CDF.

    ``inverse_cdf`` holds values of F^{-1} at ``len(inverse_cdf)`` equally
    spaced probabilities in [0, 1]; sampling interpolates linearly between them.
    """

    alpha: float
    beta: float
    inverse_cdf: tuple[float, ...]
    name: str = "custom"

    def __post_init__(self):
        if not 0 < self.alpha <= self.beta:
            raise ValueError(f"need 0 < alpha <= beta, got alpha={self.alpha}, beta={self.beta}")
        q = np.asarray(self.inverse_cdf, dtype=float)
        if len(q) < 2:
            raise ValueError("inverse CDF table needs at least two knots")
        if np.any(np.diff(q) < 0):
            raise ValueError("inverse CDF table must be nondecreasing")
        if abs(q[0]) > 1e-12 or abs(q[-1] - 1) > 1e-12:
            raise ValueError("inverse CDF table must run from 0 to 1")
        # implied density between knots is dp / dx
        dp = 1.0 / (len(q) - 1)
        dx = np.diff(q)
        if np.any(dx <= 0):
            raise ValueError("inverse CDF table has an atom (flat step)")
        dens = dp / dx
        slack = 1e-6 * self.beta
        if dens.min() < self.alpha - slack or dens.max() > self.beta + slack:
            raise ValueError(
                f"tabulated density spans [{dens.min():.4g}, {dens.max():.4g}], "
                f"outside [{self.alpha}, {self.beta}]")

    @classmethod
    def from_density(cls, pdf: Callable[[np.ndarray], np.ndarray], knots: int = 2049,
                     name: str = "custom") -> "PdfBounded":
        """Tabulate an arbitrary positive density on [0, 1] (normalised here)."""
        x = np.linspace(0.0, 1.0, 20 * knots)
        f = np.asarray(pdf(x), dtype=float)
        if np.any(f <= 0):
            raise ValueError("density must be strictly positive on [0, 1]")
        cdf = np.concatenate([[0.0], np.cumsum((f[1:] + f[:-1]) / 2 * np.diff(x))])
        cdf /= cdf[-1]
        probs = np.linspace(0.0, 1.0, knots)
        q = np.interp(probs, cdf, x)
        q[0], q[-1] = 0.0, 1.0
        dens = (1.0 / (knots - 1)) / np.diff(q)
        return cls(float(dens.min()), float(dens.max()), tuple(q.tolist()), name)

    @classmethod
    def uniform(cls, knots: int = 1025) -> "PdfBounded":
        return cls(1.0, 1.0, tuple(np.linspace(0.0, 1.0, knots).tolist()), "uniform")

    @classmethod
    def truncated_normal(cls, mean: float = 0.5, sd: float = 0.3,
                         knots: int = 2049) -> "PdfBounded":
        a, b = (0 - mean) / sd, (1 - mean) / sd
        law = stats.truncnorm(a, b, loc=mean, scale=sd)
        return cls.from_density(law.pdf, knots, name=f"truncnorm({mean},{sd})")

    @property
    def pdf_bounds(self) -> tuple[float, float]:
        return self.alpha, self.beta

    def sample(self, rng: np.random.Generator, shape) -> np.ndarray:
        q = np.asarray(self.inverse_cdf)
        grid = np.linspace(0.0, 1.0, len(q))
        return np.interp(rng.random(shape), grid, q)

    def to_dict(self) -> dict:
        # presets round-trip by name; custom tables are written out in full
        if self.name == "uniform":
            return {"kind": "pdf_bounded", "preset": "uniform", "knots": len(self.inverse_cdf)}
        if self.name.startswith("truncnorm("):
            mean, sd = (float(x) for x in self.name[len("truncnorm("):-1].split(","))
            return {"kind": "pdf_bounded", "preset": "truncnorm", "mean": mean, "sd": sd,
                    "knots": len(self.inverse_cdf)}
        return {"kind": "pdf_bounded", "alpha": self.alpha, "beta": self.beta,
                "inverse_cdf": list(self.inverse_cdf)}


@dataclass(frozen=True)
class Exponential:
    rate: float = 1.0

    def __post_init__(self):
        if not self.rate > 0:
            raise ValueError(f"rate must be positive, got {self.rate}")

    def sample(self, rng: np.random.Generator, shape) -> np.ndarray:
        return rng.exponential(1.0 / self.rate, shape)

    def to_dict(self) -> dict:
        return {"kind": "exponential", "rate": self.rate}


@dataclass(frozen=True)
class ReversedExponential:
    """Mirror image of Exp(rate) about 1/2: density ``rate * exp(-rate (1 - x))`` on (-inf, 1]."""

    rate: float = 1.0

    def __post_init__(self):
        if not self.rate > 0:
            raise ValueError(f"rate must be positive, got {self.rate}")

    def sample(self, rng: np.random.Generator, shape) -> np.ndarray:
        return 1.0 - rng.exponential(1.0 / self.rate, shape)

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        return np.where(x >= 1.0, 1.0, np.exp(-self.rate * (1.0 - np.minimum(x, 1.0))))

    def to_dict(self) -> dict:
        return {"kind": "reversed_exponential", "rate": self.rate}


DistributionSpec = Uniform01 | PdfBounded | Exponential | ReversedExponential


def spec_from_dict(data: dict) -> DistributionSpec:
    kind = data.get("kind", "uniform01")
    if kind == "uniform01":
        return Uniform01()
    if kind == "exponential":
        return Exponential(float(data.get("rate", 1.0)))
    if kind == "reversed_exponential":
        return ReversedExponential(float(data.get("rate", 1.0)))
    if kind == "pdf_bounded":
        preset = data.get("preset")
        knots = int(data.get("knots", 2049))
        if preset == "uniform":
            return PdfBounded.uniform(knots)
        if preset == "truncnorm":
            return PdfBounded.truncated_normal(float(data.get("mean", 0.5)),
                                               float(data.get("sd", 0.3)), knots)
        if preset is not None:
            raise ValueError(f"unknown pdf_bounded preset {preset!r}")
        return PdfBounded(float(data["alpha"]), float(data["beta"]),
                          tuple(float(x) for x in data["inverse_cdf"]))
    raise ValueError(f"unknown distribution kind {kind!r}")


def sample_utilities(spec: DistributionSpec, n: int, m: int, seed) -> np.ndarray:
    """``n x m`` matrix of i.i.d. draws from ``spec``."""
    if n < 1 or m < 1:
        raise ValueError(f"need n, m >= 1, got {n}, {m}")
    return spec.sample(as_generator(seed), (n, m))


def sample_reexp_edge_weights(rate: float, count: int, seed) -> np.ndarray:
    """Weights for edges into the auxiliary item, i.i.d. reversed exponential."""
    law = ReversedExponential(rate)
    if count < 0:
        raise ValueError("count must be non-negative")
    return law.sample(as_generator(seed), count)
