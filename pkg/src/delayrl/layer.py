"""The delayed-interaction simulator.

Wraps an undelayed MDP, keeps the set of action packets in transit and the
action buffer, and advances everything one step per sent packet. The agent
only ever sees observation packets; the transit set and sampled delays stay
hidden (they are reported to the harness for logging and analysis only).

Per step, in order: the sent packet's delay is sampled and the packet joins
the transit set (discarding any in-flight packet that would arrive at the
same time or later); the first buffer slot is applied to the MDP; then the
buffer installs the arriving packet's row, or shifts if nothing usable
arrives. Observation emission is deterministic given the layer state, and
observation packets are never delayed or lost: a single per-packet delay
stands in for all upstream/compute/downstream lag.
"""

from dataclasses import dataclass

from .protocol import (
    STALE,
    ActionBuffer,
    ObservationPacket,
    origin_stamp,
    select_row,
    shift_buffer,
)
from .rng import stream


@dataclass
class LayerConfig:
    """Shape and environment of the layer.

    ``max_rows`` bounds how many packet rows the layer accepts;
    ``delay_process`` is a zero-argument factory so each episode gets a
    fresh process instance.
    """

    horizon: int
    max_rows: int
    initial_action: object
    delay_process: callable

    def __post_init__(self):
        if self.horizon < 1:
            raise ValueError(f"horizon must be >= 1, got {self.horizon}")
        if self.max_rows < 1:
            raise ValueError(f"max_rows must be >= 1, got {self.max_rows}")


@dataclass(frozen=True, slots=True)
class InteractionState:
    """Full simulator state: the observable part plus in-flight packets."""

    observation: ObservationPacket
    transit: tuple  # ((arrival, packet), ...) strictly increasing arrivals


def is_initial_buffer(obs):
    """True while the buffer still holds only the layer's initial actions."""
    return origin_stamp(obs.stamp, obs.delay, obs.counter) < 0


def transmit(transit, packet, delay, now):
    """Add a packet to the transit set, superseding out-of-date traffic.

    Keeps only in-flight packets arriving strictly before the new one:
    anything the new packet would beat or tie carries older information and
    is discarded. This also keeps arrival times unique and sorted.
    """
    if delay < 1:
        raise ValueError(f"delay must be >= 1, got {delay}")
    arrival = now + delay
    kept = tuple(item for item in transit if item[0] < arrival)
    return kept + ((arrival, packet),)


class InteractionLayer:
    """Single-episode simulator instance.

    Owns its random streams (dynamics and delays); construct one per
    episode with an episode-specific seed, or inject shared generators via
    ``mdp_rng``/``delay_rng`` for bulk runs.
    """

    def __init__(self, mdp, config, seed=None, *, mdp_rng=None, delay_rng=None):
        if seed is None and (mdp_rng is None or delay_rng is None):
            raise ValueError("provide a seed or explicit generators")
        self.mdp = mdp
        self.config = config
        self._mdp_rng = mdp_rng if mdp_rng is not None else stream(seed, "mdp")
        self._delay_rng = delay_rng if delay_rng is not None else stream(seed, "delay")
        self._delay_process = config.delay_process()
        self._state = None
        self._terminal = False
        self.stale_discards = 0

    @property
    def state(self):
        return self._state

    def reset(self):
        """Draw the initial system state and hand out the first observation."""
        if self._state is not None:
            raise RuntimeError("layer instances are single-episode; make a new one")
        s0 = self.mdp.sample_initial(self._mdp_rng)
        buffer = ActionBuffer(
            slots=(self.config.initial_action,) * self.config.horizon,
            delay=1,
            counter=0,
        )
        obs = ObservationPacket(stamp=0, state=s0, buffer=buffer)
        self._state = InteractionState(observation=obs, transit=())
        return obs

    def step(self, packet):
        """Advance one step given the agent's reply to the last observation.

        Returns (reward, next observation, terminal flag, info) where info
        carries the hidden sampled delay and what happened at the buffer
        ("install", "shift", or "stale").
        """
        if self._state is None:
            raise RuntimeError("reset() before stepping")
        if self._terminal:
            raise RuntimeError("episode finished; the layer cannot step further")
        obs = self._state.observation
        t = obs.stamp
        if packet.stamp != t:
            raise ValueError(
                f"packet stamped {packet.stamp} does not answer observation {t}"
            )
        if packet.width != self.config.horizon:
            raise ValueError(
                f"packet rows have width {packet.width}, layer horizon is "
                f"{self.config.horizon}"
            )
        if packet.rows > self.config.max_rows:
            raise ValueError(
                f"packet has {packet.rows} rows, layer accepts at most "
                f"{self.config.max_rows}"
            )

        delay = self._delay_process.sample(self._delay_rng)
        transit = transmit(self._state.transit, packet, delay, t)

        applied = obs.buffer.slots[0]
        reward = self.mdp.reward(obs.state, applied)
        next_state = self.mdp.sample_next(obs.state, applied, self._mdp_rng)
        terminal = self.mdp.is_terminal(next_state)

        event = "shift"
        if transit and transit[0][0] == t + 1:
            arrived = transit[0][1]
            transit = transit[1:]
            row = select_row(arrived, t + 1)
            if row is STALE:
                buffer = shift_buffer(obs.buffer)
                self.stale_discards += 1
                event = "stale"
            else:
                buffer = ActionBuffer(slots=row, delay=t + 1 - arrived.stamp,
                                      counter=0)
                event = "install"
        else:
            buffer = shift_buffer(obs.buffer)

        next_obs = ObservationPacket(stamp=t + 1, state=next_state, buffer=buffer)
        # in-flight packets die with the episode; nothing outlives a terminal
        self._state = InteractionState(observation=next_obs,
                                       transit=() if terminal else transit)
        self._terminal = terminal
        info = {"delay": delay, "event": event}
        return reward, next_obs, terminal, info
