"""Decision makers for the delayed-interaction protocol.

Three packet-building strategies share the layer interface:

* ``PassthroughAgent`` replicates one action over the whole matrix — the
  do-nothing baseline that simply suffers the delay.
* ``ConstantDelayAgent`` arranges the matrix so every freshly generated
  action executes exactly ``horizon`` steps after generation, turning any
  delay bounded by the horizon into a constant one.
* ``DelayAdaptiveAgent`` fills each row for the delay it would be installed
  under, guessing the actions applied in the meantime from its own recently
  sent packets and planning through the exact distribution model.

Agents are single-owner per episode: call ``reset`` with a fresh stream,
then ``act`` once per observation.
"""

from dataclasses import dataclass, field

import numpy as np

from .harness import reconstruct_transitions, run_episode
from .model import critic_update, dist_policy, TabularCritic
from .protocol import make_packet
from .rng import child_seed


class PacketMemory:
    """Ring of the most recent sent packets, keyed by stamp."""

    def __init__(self, capacity):
        if capacity < 1:
            raise ValueError("capacity must be >= 1")
        self.capacity = capacity
        self._packets = {}

    def add(self, packet):
        stamps = self._packets.keys()
        if stamps and packet.stamp != max(stamps) + 1:
            raise ValueError(
                f"non-contiguous stamp {packet.stamp}; have {sorted(stamps)}"
            )
        self._packets[packet.stamp] = packet
        cutoff = packet.stamp - self.capacity
        for old in [s for s in self._packets if s <= cutoff]:
            del self._packets[old]

    def get(self, stamp):
        try:
            return self._packets[stamp]
        except KeyError:
            raise KeyError(f"no memorized packet stamped {stamp}") from None

    def __contains__(self, stamp):
        return stamp in self._packets

    def __len__(self):
        return len(self._packets)


def memorized_action_selection(k, memory, now):
    """Guess the next k applied actions by assuming recent packets share delay k.

    If every packet arrives k steps after sending, the action applied at
    each step is the first entry of row k of the most recently arrived
    packet. Returns those entries for the packets stamped now-k .. now-1,
    oldest first. Raises if a packet is missing or has fewer than k rows.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    guesses = []
    for stamp in range(now - k, now):
        packet = memory.get(stamp)
        if packet.rows < k:
            raise ValueError(
                f"packet {stamp} has {packet.rows} rows, need row {k}"
            )
        guesses.append(packet.matrix[k - 1][0])
    return tuple(guesses)


def continuation(slots, n):
    """First n actions the buffer would play out: its slots, last repeated."""
    if n <= len(slots):
        return tuple(slots[:n])
    return tuple(slots) + (slots[-1],) * (n - len(slots))


def passthrough_packet(obs, action, rows, horizon):
    """Matrix with every entry equal to one freshly chosen action."""
    return make_packet(obs.stamp, ((action,) * horizon,) * rows)


def constant_lag_packet(obs, new_action, horizon):
    """Arrange actions so each executes a fixed lag after generation.

    The buffer already schedules actions for steps t .. t+h-1; one new
    action is generated for step t+h. Row i replays that schedule from
    step t+i on, padded with the new action, so whenever the packet lands
    within the horizon the new action runs exactly at t+h.
    """
    if len(obs.slots) != horizon:
        raise ValueError(
            f"buffer reports {len(obs.slots)} actions, horizon is {horizon}"
        )
    planned = obs.slots[1:] + (new_action,)  # planned[m] runs at step t+m+1
    rows = tuple(
        tuple(planned[min(horizon, i + j + 1) - 1] for j in range(horizon))
        for i in range(horizon)
    )
    return make_packet(obs.stamp, rows)


def adaptive_packet(obs, memory, model, policy, rows, horizon, rng):
    """Fill row k for an assumed delay of k.

    Row k starts from the distribution of the state the row's first action
    would meet (the observed state pushed through the guessed in-flight
    actions), then alternates policy draws with model steps across the
    columns. When the memory cannot cover a row (early in the episode),
    the buffer's reported actions stand in for the guesses.
    """
    matrix = []
    for k in range(1, rows + 1):
        if obs.stamp - k < 0:
            assumed = continuation(obs.slots, k)
        else:
            assumed = memorized_action_selection(k, memory, obs.stamp)
        z = model.step_seq(model.embed(obs.state), assumed)
        row = []
        for _ in range(horizon):
            a = policy(z, rng)
            row.append(a)
            z = model.step(z, a)
        matrix.append(tuple(row))
    return make_packet(obs.stamp, matrix)


class DistributionPolicy:
    """Epsilon-greedy action choice on a state distribution.

    Greedy mode (epsilon 0) consumes no randomness, so evaluation runs
    replay exactly from the layer streams alone.
    """

    def __init__(self, critic, epsilon=0.0):
        if not 0.0 <= epsilon <= 1.0:
            raise ValueError(f"epsilon must be in [0, 1], got {epsilon}")
        self.critic = critic
        self.epsilon = epsilon

    def __call__(self, z, rng):
        if self.epsilon > 0.0 and rng.random() < self.epsilon:
            return int(rng.integers(self.critic.n_actions))
        return dist_policy(z, self.critic.q)


class RandomPolicy:
    """Uniform action choice, ignoring the state."""

    def __init__(self, n_actions):
        self.n_actions = n_actions

    def __call__(self, state, rng):
        return int(rng.integers(self.n_actions))


class MyopicPolicy:
    """Greedy on immediate reward of the (possibly stale) observed state."""

    def __init__(self, mdp):
        self.rewards = np.asarray(mdp.rewards)

    def __call__(self, state, rng):
        return int(np.argmax(self.rewards[state]))


class PassthroughAgent:
    def __init__(self, policy, rows, horizon):
        self.policy = policy
        self.rows = rows
        self.horizon = horizon
        self._rng = None

    def reset(self, rng):
        self._rng = rng

    def act(self, obs):
        action = self.policy(obs.state, self._rng)
        return passthrough_packet(obs, action, self.rows, self.horizon)


class ConstantDelayAgent:
    """Forces every generated action to run ``horizon`` steps after its birth.

    ``policy(state, planned_actions, rng)`` sees the actions already
    scheduled for the intervening steps. With ``tag_targets`` each new
    action is wrapped as (action, target_step) so a trace audit can verify
    the timing guarantee; that requires a tag-tolerant environment and a
    policy that ignores the planned-action values.
    """

    def __init__(self, policy, horizon, tag_targets=False):
        self.policy = policy
        self.horizon = horizon
        self.tag_targets = tag_targets
        self._rng = None

    def reset(self, rng):
        self._rng = rng

    def act(self, obs):
        action = self.policy(obs.state, obs.slots, self._rng)
        if self.tag_targets:
            action = (action, obs.stamp + self.horizon)
        return constant_lag_packet(obs, action, self.horizon)


class ConstantDelayDistributionPolicy:
    """Distribution policy for the constant-lag agent: push the observed
    state through every already-scheduled action, then choose."""

    def __init__(self, model, critic, epsilon=0.0):
        self.model = model
        self.inner = DistributionPolicy(critic, epsilon)

    def __call__(self, state, planned, rng):
        z = self.model.step_seq(self.model.embed(state), planned)
        return self.inner(z, rng)


def as_planned_policy(state_policy):
    """Adapt a plain state policy to the constant-delay signature."""
    return lambda state, planned, rng: state_policy(state, rng)


class DelayAdaptiveAgent:
    """Model-based agent that prepares a row per possible delay."""

    def __init__(self, model, critic, rows, horizon, epsilon=0.0):
        self.model = model
        self.critic = critic
        self.rows = rows
        self.horizon = horizon
        self.policy = DistributionPolicy(critic, epsilon)
        self.memory = PacketMemory(rows)
        self._rng = None

    def reset(self, rng):
        self._rng = rng
        self.memory = PacketMemory(self.rows)

    def act(self, obs):
        packet = adaptive_packet(obs, self.memory, self.model, self.policy,
                                 self.rows, self.horizon, self._rng)
        self.memory.add(packet)
        return packet


@dataclass
class TrainerConfig:
    episodes: int
    max_steps: int
    learning_rate: float = 0.1
    discount: float = 0.95
    epsilon: float = 0.3
    epsilon_decay: float = 0.99
    min_epsilon: float = 0.01
    eval_cadence: int = 0      # evaluate every N episodes; 0 disables
    eval_episodes: int = 5
    eval_max_steps: int = None

    def __post_init__(self):
        if self.eval_max_steps is None:
            self.eval_max_steps = self.max_steps


@dataclass
class EvalPoint:
    after_episode: int
    mean_return: float
    std_return: float


@dataclass
class TrainResult:
    critic: TabularCritic
    episode_returns: list
    curve: list = field(default_factory=list)

    @property
    def best_mean_return(self):
        if self.curve:
            return max(p.mean_return for p in self.curve)
        return max(self.episode_returns) if self.episode_returns else None


def evaluate_agent(mdp, layer_config, make_agent, seed, episodes, max_steps):
    """Greedy rollouts on fresh streams; returns per-episode returns."""
    returns = []
    for ep in range(episodes):
        agent = make_agent()
        trace = run_episode(mdp, agent, layer_config,
                            child_seed(seed, "eval", ep), max_steps)
        returns.append(trace.episode_return())
    return returns


def train_agent(mdp, layer_config, make_agent, cfg, seed, critic=None):
    """Q-learning on reconstructed undelayed transitions.

    ``make_agent(critic, epsilon)`` builds the behavior agent each episode;
    the critic scores (undelayed state, action) pairs and is shared across
    episodes. Works for any agent whose trace reconstructs, so the
    adaptive and constant-delay strategies train identically.
    """
    if critic is None:
        critic = TabularCritic(mdp.n_states, mdp.n_actions,
                               cfg.learning_rate, cfg.discount)
    epsilon = cfg.epsilon
    result = TrainResult(critic=critic, episode_returns=[])
    for ep in range(cfg.episodes):
        agent = make_agent(critic, epsilon)
        trace = run_episode(mdp, agent, layer_config,
                            child_seed(seed, "train", ep), cfg.max_steps)
        for transition in reconstruct_transitions(trace):
            critic_update(critic, transition)
        result.episode_returns.append(trace.episode_return())
        epsilon = max(cfg.min_epsilon, epsilon * cfg.epsilon_decay)
        if cfg.eval_cadence and (ep + 1) % cfg.eval_cadence == 0:
            returns = evaluate_agent(
                mdp, layer_config, lambda: make_agent(critic, 0.0),
                child_seed(seed, "evalpoint", ep), cfg.eval_episodes,
                cfg.eval_max_steps,
            )
            result.curve.append(EvalPoint(
                after_episode=ep + 1,
                mean_return=float(np.mean(returns)),
                std_return=float(np.std(returns)),
            ))
    return result
