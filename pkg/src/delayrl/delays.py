"""Markovian per-packet delay generators.

Each process produces one integer delay >= 1 per sent packet. Instances
own their evolving state (mode, queue contents) but draw all randomness
from the generator passed to ``sample``; construction never consumes
draws, so processes can be built eagerly from configs. One instance per
episode; instances are independent and never share state.
"""

import math
from collections import deque

from .rng import exponential

GOOD = "good"
BAD = "bad"


class ConstantDelay:
    """Degenerate process: every packet takes exactly ``delay`` steps."""

    def __init__(self, delay):
        if delay < 1:
            raise ValueError(f"delay must be >= 1, got {delay}")
        self.delay = int(delay)
        self.low_horizon = self.delay
        self.worst_case_horizon = self.delay

    def sample(self, rng):
        return self.delay


class CategoricalDelay:
    """I.i.d. categorical delays; used mainly by the verification oracles."""

    def __init__(self, support):
        support = [(int(d), float(p)) for d, p in support]
        if not support or any(d < 1 for d, _ in support):
            raise ValueError("support must be non-empty with delays >= 1")
        if abs(sum(p for _, p in support) - 1.0) > 1e-12:
            raise ValueError("support probabilities must sum to 1")
        self.support = support
        self.low_horizon = min(d for d, _ in support)
        self.worst_case_horizon = max(d for d, _ in support)

    def sample(self, rng):
        u = rng.random()
        acc = 0.0
        for d, p in self.support:
            acc += p
            if u < acc:
                return d
        return self.support[-1][0]


class GilbertElliotDelay:
    """Two-state Markov-modulated delay: short delays in the good mode,
    long bursts in the bad mode.

    Draw order per sample: one uniform for the emission from the current
    mode, then one uniform for the mode switch. The emission uniform is
    consumed even when the mode's distribution is degenerate, so the
    stream layout does not depend on the parameters.
    """

    def __init__(self, p_good_to_bad, p_bad_to_good, good_delays, bad_delays,
                 low_horizon, worst_case_horizon, mode=GOOD):
        for name, p in (("p_good_to_bad", p_good_to_bad),
                        ("p_bad_to_good", p_bad_to_good)):
            if not 0.0 <= p <= 1.0:
                raise ValueError(f"{name} must be in [0, 1], got {p}")
        self.p_good_to_bad = float(p_good_to_bad)
        self.p_bad_to_good = float(p_bad_to_good)
        self.good_delays = _checked_emission(good_delays)
        self.bad_delays = _checked_emission(bad_delays)
        self.low_horizon = int(low_horizon)
        self.worst_case_horizon = int(worst_case_horizon)
        if mode not in (GOOD, BAD):
            raise ValueError(f"unknown mode {mode!r}")
        self.mode = mode

    def sample(self, rng):
        dist = self.good_delays if self.mode == GOOD else self.bad_delays
        u = rng.random()
        delay = dist[-1][0]
        acc = 0.0
        for d, p in dist:
            acc += p
            if u < acc:
                delay = d
                break
        switch_p = self.p_good_to_bad if self.mode == GOOD else self.p_bad_to_good
        if rng.random() < switch_p:
            self.mode = BAD if self.mode == GOOD else GOOD
        return delay

    def stationary_bad_fraction(self):
        """Long-run fraction of samples emitted from the bad mode."""
        total = self.p_good_to_bad + self.p_bad_to_good
        return self.p_good_to_bad / total


def _checked_emission(dist):
    dist = tuple((int(d), float(p)) for d, p in dist)
    if not dist or any(d < 1 for d, _ in dist):
        raise ValueError("emission support must be non-empty with delays >= 1")
    if abs(sum(p for _, p in dist) - 1.0) > 1e-12:
        raise ValueError("emission probabilities must sum to 1")
    return dist


# Named two-mode parameterizations used throughout the test suite. Both
# start in the good mode. low_horizon is the largest delay the good mode can
# emit; worst_case_horizon bounds the process overall.
_GE_TABLE = {
    "GE_1_23": dict(
        p_good_to_bad=1 / 125,
        p_bad_to_good=1 / 20,
        good_delays=[(1, 15 / 16), (2, 1 / 16)],
        bad_delays=[(22, 3 / 11), (23, 5 / 11), (24, 3 / 11)],
        low_horizon=2,
        worst_case_horizon=24,
    ),
    "GE_4_32": dict(
        p_good_to_bad=1 / 250,
        p_bad_to_good=1 / 32,
        good_delays=[(4, 1.0)],
        bad_delays=[(32, 1.0)],
        low_horizon=4,
        worst_case_horizon=32,
    ),
}


def ge_params(name):
    """Build one of the named two-mode processes ("GE_1_23", "GE_4_32")."""
    try:
        params = _GE_TABLE[name]
    except KeyError:
        raise ValueError(
            f"unknown Gilbert-Elliot parameterization {name!r}; "
            f"known: {sorted(_GE_TABLE)}"
        ) from None
    return GilbertElliotDelay(**params)


class MM1QueueDelay:
    """Sojourn-time delays from a hand-simulated M/M/1 FIFO queue.

    Each sample advances the queue to its next departure and returns that
    packet's time in system, rounded up to whole steps. Inter-arrival and
    service times are exponential with rates ``arrival_rate`` and
    ``service_rate`` (stable only when arrival_rate < service_rate). The
    process itself is unbounded; ``worst_case`` is advisory metadata for
    constant-delay agents, not a truncation.

    Draw order: the first sample begins by drawing the initial arrival
    time; thereafter, whenever a packet enters an idle queue the next
    inter-arrival is drawn before its service time; each further arrival
    folded into a busy period draws one inter-arrival; each departure that
    leaves the queue non-empty draws the next service time.
    """

    def __init__(self, arrival_rate, service_rate, worst_case=16):
        if arrival_rate <= 0 or service_rate <= 0:
            raise ValueError("rates must be positive")
        if arrival_rate >= service_rate:
            raise ValueError(
                f"unstable queue: arrival_rate {arrival_rate} >= "
                f"service_rate {service_rate}"
            )
        self.arrival_rate = float(arrival_rate)
        self.service_rate = float(service_rate)
        self.low_horizon = 1
        self.worst_case_horizon = int(worst_case)
        self._next_arrival = None  # first packet not yet scheduled
        self._service_done = None  # nothing in service
        self._queue = deque()      # insertion times, FIFO

    def sample(self, rng):
        if self._next_arrival is None:
            self._next_arrival = exponential(rng, self.arrival_rate)
        if self._service_done is None:
            t = self._next_arrival
            self._queue.append(t)
            self._next_arrival = exponential(rng, self.arrival_rate) + t
            self._service_done = exponential(rng, self.service_rate) + t
        while self._next_arrival < self._service_done:
            t = self._next_arrival
            self._queue.append(t)
            self._next_arrival = exponential(rng, self.arrival_rate) + t
        t = self._service_done
        inserted = self._queue.popleft()
        delay = math.ceil(t - inserted)
        if self._queue:
            self._service_done = exponential(rng, self.service_rate) + t
        else:
            self._service_done = None
        return delay


def build_delay_process(spec):
    """Construct a delay process from a structured config mapping."""
    if not isinstance(spec, dict) or "kind" not in spec:
        raise ValueError(f"delay spec must be a mapping with a 'kind': {spec!r}")
    kind = spec["kind"]
    if kind == "constant":
        return ConstantDelay(spec["delay"])
    if kind == "categorical":
        return CategoricalDelay(spec["support"])
    if kind == "ge":
        if "name" in spec:
            return ge_params(spec["name"])
        return GilbertElliotDelay(
            p_good_to_bad=spec["p_good_to_bad"],
            p_bad_to_good=spec["p_bad_to_good"],
            good_delays=spec["good_delays"],
            bad_delays=spec["bad_delays"],
            low_horizon=spec["low_horizon"],
            worst_case_horizon=spec["worst_case_horizon"],
        )
    if kind == "mm1":
        return MM1QueueDelay(
            arrival_rate=spec["arrival_rate"],
            service_rate=spec["service_rate"],
            worst_case=spec.get("worst_case", 16),
        )
    raise ValueError(f"unknown delay process kind {kind!r}")
