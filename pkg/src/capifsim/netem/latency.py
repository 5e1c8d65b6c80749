"""RTT sampling from percentile profiles and per-transaction delay charging."""

from __future__ import annotations

import math
import random
from dataclasses import dataclass
from enum import Enum
from functools import lru_cache
from statistics import NormalDist

from scipy.optimize import brentq

from ..model import ZoneId
from .topology import LinkProfile, Topology

_STD = NormalDist()
Z90 = _STD.inv_cdf(0.90)
Z99 = _STD.inv_cdf(0.99)
CLAMP_FACTOR = 1.2


class DelayKind(str, Enum):
    P50 = "p50"
    PERCENTILE = "percentile"
    STOCHASTIC = "stochastic"


@dataclass(frozen=True)
class DelayMode:
    kind: DelayKind = DelayKind.P50
    percentile: float | None = None
    seed: int | None = None

    def __post_init__(self):
        if self.kind is DelayKind.PERCENTILE:
            if self.percentile is None or not 0 < self.percentile < 100:
                raise ValueError("percentile mode needs 0 < p < 100")
        if self.kind is DelayKind.STOCHASTIC and self.seed is None:
            raise ValueError("stochastic delay mode requires an explicit seed")

    @classmethod
    def deterministic_p50(cls) -> "DelayMode":
        return cls(DelayKind.P50)

    @classmethod
    def at_percentile(cls, p: float) -> "DelayMode":
        return cls(DelayKind.PERCENTILE, percentile=float(p))

    @classmethod
    def stochastic(cls, seed: int) -> "DelayMode":
        return cls(DelayKind.STOCHASTIC, seed=int(seed))

    @classmethod
    def parse(cls, text: str, seed: int | None = None) -> "DelayMode":
        """``p50``, ``p<N>`` (e.g. ``p90``) or ``stochastic``."""
        t = text.strip().lower()
        if t == "p50":
            return cls.deterministic_p50()
        if t == "stochastic":
            if seed is None:
                raise ValueError("stochastic delay mode requires --seed")
            return cls.stochastic(seed)
        if t.startswith("p"):
            try:
                return cls.at_percentile(float(t[1:]))
            except ValueError:
                pass
        raise ValueError(f"unknown delay mode {text!r}; use p50, p<N> or stochastic")

    @property
    def deterministic(self) -> bool:
        return self.kind is not DelayKind.STOCHASTIC

    @property
    def label(self) -> str:
        if self.kind is DelayKind.PERCENTILE:
            return f"p{self.percentile:g}"
        return self.kind.value


class RttDistribution:
    """Shifted log-normal calibrated to a link's three RTT percentiles.

    The body below p90 is the log-normal through (p50, p90).  When the same
    curve cannot also reach p99 (light-tailed links), the part above p90 uses
    its own log-scale so all three percentiles are hit exactly.  Draws are
    clamped at 1.2 x p99.
    """

    def __init__(self, p50: float, p90: float, p99: float):
        self.p50, self.p90, self.p99 = p50, p90, p99
        self.clamp = CLAMP_FACTOR * p99
        self.shift = _solve_shift(p50, p90, p99)
        lo = max(p50 - self.shift, 1e-12)
        self._mu = math.log(lo)
        self._sigma_body = (math.log(p90 - self.shift) - self._mu) / Z90 if p90 > 0 else 0.0
        self._log90 = math.log(max(p90 - self.shift, 1e-12))
        self._sigma_tail = (math.log(max(p99 - self.shift, 1e-12)) - self._log90) / (Z99 - Z90)

    @property
    def single_lognormal(self) -> bool:
        return math.isclose(self._sigma_body, self._sigma_tail, rel_tol=1e-9, abs_tol=1e-12)

    def at_z(self, z: float) -> float:
        if self.p99 <= 0:
            return 0.0
        if z <= Z90:
            x = self.shift + math.exp(self._mu + self._sigma_body * z)
        else:
            x = self.shift + math.exp(self._log90 + self._sigma_tail * (z - Z90))
        return min(x, self.clamp)

    def quantile(self, pct: float) -> float:
        if pct == 50:
            return self.p50
        if pct == 90:
            return self.p90
        if pct == 99:
            return self.p99
        return self.at_z(_STD.inv_cdf(pct / 100.0))

    def sample(self, rng: random.Random) -> float:
        return self.at_z(rng.gauss(0.0, 1.0))


def _solve_shift(p50: float, p90: float, p99: float) -> float:
    """Shift that lets one log-normal pass through all three percentiles, or
    0 when none exists with a non-negative shift."""
    d90, d99 = p90 - p50, p99 - p50
    ratio = Z99 / Z90
    if p50 <= 0 or d90 <= 0 or d99 <= ratio * d90:
        return 0.0

    def gap(a: float) -> float:
        return math.log1p(d99 / a) - ratio * math.log1p(d90 / a)

    lo, hi = 1e-9 * p50, p50
    if gap(hi) < 0:
        # the root sits beyond a = p50, i.e. at a negative shift
        return 0.0
    if gap(lo) > 0:
        # p90 hugs p50 so tightly that the shift would swallow the whole body
        return 0.0
    a = brentq(gap, lo, hi, xtol=1e-12)
    return p50 - a


@lru_cache(maxsize=None)
def distribution_for(profile: LinkProfile) -> RttDistribution:
    return RttDistribution(profile.rtt_p50, profile.rtt_p90, profile.rtt_p99)


def sample_rtt(topology: Topology, a: ZoneId, b: ZoneId, mode: DelayMode,
               rng: random.Random | None = None) -> float:
    """One RTT in milliseconds between two zones under ``mode``."""
    for z in (a, b):
        if not topology.has_zone(z):
            raise ValueError(f"zone {z} is not in topology {topology.name}")
    if a == b:
        return topology.intra_zone_rtt_ms
    profile = topology.link(a, b)
    if mode.kind is DelayKind.P50:
        return profile.rtt_p50
    dist = distribution_for(profile)
    if mode.kind is DelayKind.PERCENTILE:
        return dist.quantile(mode.percentile)
    if rng is None:
        raise ValueError("stochastic sampling needs an rng")
    return dist.sample(rng)


def ms_to_us(ms: float) -> int:
    return int(round(ms * 1000.0))


@dataclass(frozen=True)
class TransactionDelay:
    request_us: int
    response_us: int

    @property
    def rtt_us(self) -> int:
        return self.request_us + self.response_us


class LatencyEmulator:
    """Charges one sampled RTT per HTTP transaction, split between the request
    and response legs."""

    def __init__(self, topology: Topology, mode: DelayMode, seed: int | None = None):
        self.topology = topology
        self.mode = mode
        if seed is None:
            seed = mode.seed if mode.seed is not None else 0
        self._rng = random.Random(seed)

    def rtt_us(self, a: ZoneId, b: ZoneId) -> int:
        return ms_to_us(sample_rtt(self.topology, a, b, self.mode, self._rng))

    def transaction_delay(self, src: ZoneId, dst: ZoneId) -> TransactionDelay:
        rtt = self.rtt_us(src, dst)
        request = rtt // 2
        return TransactionDelay(request, rtt - request)
