"""Exhaustive verification oracles for the delayed-interaction protocol.

Two independent routes to the same episode-outcome distribution:

* ``enumerate_outcomes`` walks the protocol's transition cases directly,
  written from the definitions on bare tuples with exact rational
  probabilities.
* ``simulator_distribution`` drives the real simulator over every
  combination of random draws via scripted stubs, weighting each path with
  the same exact rationals.

Agreement to zero total variation checks the simulator against the
definitions; ``monte_carlo_distribution`` then ties both to actual seeded
sampling. Problems must stay desk-sized (bounds checked at construction).
"""

from dataclasses import dataclass
from fractions import Fraction
from itertools import product

from .delays import CategoricalDelay
from .envs import FiniteMdp
from .layer import InteractionLayer, LayerConfig
from .protocol import make_packet
from .rng import stream

_MAX_STATES = 3
_MAX_ACTIONS = 2
_MAX_STEPS = 5


@dataclass(frozen=True)
class TinySpec:
    """A desk-sized delayed-interaction problem with exact probabilities.

    ``transitions[a][s][s']``, ``initial[s]`` and the delay probabilities
    are Fractions; ``agent_fn(t, state, slots, delta, counter)`` must be a
    deterministic function returning the packet matrix rows.
    """

    transitions: tuple
    rewards: tuple
    initial: tuple
    delays: tuple          # ((delay, Fraction), ...)
    horizon: int           # buffer width
    max_rows: int
    steps: int
    initial_action: int
    agent_fn: callable
    terminal: tuple = None

    def __post_init__(self):
        n_actions = len(self.transitions)
        n_states = len(self.transitions[0])
        if n_states > _MAX_STATES or n_actions > _MAX_ACTIONS:
            raise ValueError(
                f"enumeration bounds exceeded: {n_states} states, "
                f"{n_actions} actions (max {_MAX_STATES}, {_MAX_ACTIONS})"
            )
        if self.steps > _MAX_STEPS:
            raise ValueError(f"enumeration bounds exceeded: {self.steps} steps")
        for a in range(n_actions):
            for s in range(n_states):
                if sum(self.transitions[a][s]) != 1:
                    raise ValueError(f"transition row ({a}, {s}) must sum to 1")
        if sum(self.initial) != 1:
            raise ValueError("initial distribution must sum to 1")
        if sum(p for _, p in self.delays) != 1:
            raise ValueError("delay probabilities must sum to 1")
        if any(d < 1 for d, _ in self.delays):
            raise ValueError("delays must be >= 1")
        if self.terminal is None:
            object.__setattr__(self, "terminal",
                               (False,) * len(self.transitions[0]))

    @property
    def n_states(self):
        return len(self.transitions[0])

    @property
    def n_actions(self):
        return len(self.transitions)

    def float_mdp(self):
        return FiniteMdp(
            transitions=[[[float(p) for p in row] for row in mat]
                         for mat in self.transitions],
            rewards=[[float(r) for r in row] for row in self.rewards],
            initial=[float(p) for p in self.initial],
            terminal=self.terminal,
            label="tiny-oracle",
        )

    def float_delays(self):
        return [(d, float(p)) for d, p in self.delays]


def enumerate_outcomes(spec):
    """Exact outcome distribution, enumerated directly from the definitions.

    Outcomes are tuples of per-step (state, applied action, reward) ending
    with the final state. Probabilities are Fractions summing to 1.
    """
    out = {}
    for s0 in range(spec.n_states):
        p0 = spec.initial[s0]
        if p0 == 0:
            continue
        buffer0 = ((spec.initial_action,) * spec.horizon, 1, 0)
        _expand(spec, 0, s0, buffer0, (), p0, (), out)
    return out


def _expand(spec, t, s, buffer, transit, prob, prefix, out):
    slots, delta, counter = buffer
    if t == spec.steps or spec.terminal[s]:
        out[prefix + (s,)] = out.get(prefix + (s,), Fraction(0)) + prob
        return
    matrix = tuple(tuple(row) for row in
                   spec.agent_fn(t, s, slots, delta, counter))
    applied = slots[0]
    reward = float(spec.rewards[s][applied])
    step_label = (s, applied, reward)
    for d, p_delay in spec.delays:
        arrival = t + d
        # newest information wins: drop in-flight packets it would beat or tie
        candidate = tuple(x for x in transit if x[0] < arrival)
        candidate += ((arrival, t, matrix),)
        if candidate[0][0] == t + 1:
            _, stamp, mat = candidate[0]
            rest = candidate[1:]
            offset = t + 1 - stamp
            if offset <= len(mat):
                next_buffer = (mat[offset - 1], offset, 0)
            else:
                next_buffer = (_shifted(slots), delta, counter + 1)
            next_transit = rest
        else:
            next_buffer = (_shifted(slots), delta, counter + 1)
            next_transit = candidate
        for s2 in range(spec.n_states):
            p_next = spec.transitions[applied][s][s2]
            if p_next == 0:
                continue
            _expand(spec, t + 1, s2, next_buffer, next_transit,
                    prob * p_delay * p_next, prefix + (step_label,), out)


def _shifted(slots):
    return slots[1:] + (slots[-1],)


class _ScriptExhausted(Exception):
    pass


class _ScriptedDelay:
    def __init__(self, seq):
        self.seq = list(seq)

    def sample(self, rng):
        if not self.seq:
            raise _ScriptExhausted
        return self.seq.pop(0)


class _ScriptedMdp:
    """Real MDP surface with predetermined draws, for exhaustive driving."""

    def __init__(self, base, s0, next_states):
        self.base = base
        self.s0 = s0
        self.next_states = list(next_states)
        self.label = "scripted"

    @property
    def n_states(self):
        return self.base.n_states

    @property
    def n_actions(self):
        return self.base.n_actions

    def is_terminal(self, s):
        return self.base.is_terminal(s)

    def reward(self, s, a):
        return self.base.reward(s, a)

    def sample_initial(self, rng):
        return self.s0

    def sample_next(self, s, a, rng):
        if not self.next_states:
            raise _ScriptExhausted
        return self.next_states.pop(0)


class _FnAgent:
    """Deterministic agent over observations; packets are memoized because
    bulk sampling revisits the same few observations millions of times."""

    def __init__(self, fn):
        self.fn = fn
        self._cache = {}

    def reset(self, rng):
        pass

    def act(self, obs):
        key = (obs.stamp, obs.state, obs.slots, obs.delay, obs.counter)
        packet = self._cache.get(key)
        if packet is None:
            packet = make_packet(obs.stamp, self.fn(*key))
            self._cache[key] = packet
        return packet


def simulator_distribution(spec):
    """Outcome distribution of the real simulator, exact over all draws.

    Depth-first over draw prefixes: each path replays the simulator with
    scripted dynamics and delay draws, and is weighted by the exact
    probability of those draws. Agreement with ``enumerate_outcomes`` is
    the protocol-correctness check.
    """
    base = spec.float_mdp()
    delay_probs = dict(spec.delays)
    delay_values = [d for d, _ in spec.delays]
    out = {}
    for s0 in range(spec.n_states):
        if spec.initial[s0] == 0:
            continue
        pending = [((), ())]
        while pending:
            dseq, sseq = pending.pop()
            result = _run_scripted(spec, base, s0, dseq, sseq, delay_probs)
            if result == "extend":
                pending.extend(
                    (dseq + (d,), sseq + (s2,))
                    for d, s2 in product(delay_values, range(spec.n_states))
                )
            elif result is not None:
                outcome, prob = result
                out[outcome] = out.get(outcome, Fraction(0)) + prob
    return out


def _run_scripted(spec, base, s0, dseq, sseq, delay_probs):
    config = LayerConfig(
        horizon=spec.horizon,
        max_rows=spec.max_rows,
        initial_action=spec.initial_action,
        delay_process=lambda: _ScriptedDelay(dseq),
    )
    mdp = _ScriptedMdp(base, s0, sseq)
    layer = InteractionLayer(mdp, config, seed=0)
    agent = _FnAgent(spec.agent_fn)
    obs = layer.reset()
    prob = spec.initial[s0]
    outcome = []
    for i in range(spec.steps):
        try:
            packet = agent.act(obs)
            reward, next_obs, terminal, _ = layer.step(packet)
        except _ScriptExhausted:
            return "extend"
        applied = obs.slots[0]
        p_next = spec.transitions[applied][obs.state][next_obs.state]
        prob *= delay_probs[dseq[i]] * p_next
        if prob == 0:
            return None  # impossible draw path; contributes nothing
        outcome.append((obs.state, applied, reward))
        obs = next_obs
        if terminal:
            break
    if len(dseq) != len(outcome):
        return None  # longer scripts re-cover a path already counted exactly
    return tuple(outcome) + (obs.state,), prob


def monte_carlo_distribution(spec, episodes, seed):
    """Empirical outcome frequencies from real seeded sampling."""
    base = spec.float_mdp()
    # i.i.d. process carries no state, so one instance can serve all episodes
    process = CategoricalDelay(spec.float_delays())
    config = LayerConfig(
        horizon=spec.horizon,
        max_rows=spec.max_rows,
        initial_action=spec.initial_action,
        delay_process=lambda: process,
    )
    agent = _FnAgent(spec.agent_fn)
    mdp_rng = stream(seed, "oracle-mc", "mdp")
    delay_rng = stream(seed, "oracle-mc", "delay")
    counts = {}
    for _ in range(episodes):
        layer = InteractionLayer(base, config, mdp_rng=mdp_rng,
                                 delay_rng=delay_rng)
        obs = layer.reset()
        outcome = []
        for _ in range(spec.steps):
            packet = agent.act(obs)
            reward, next_obs, terminal, _ = layer.step(packet)
            outcome.append((obs.state, obs.slots[0], reward))
            obs = next_obs
            if terminal:
                break
        key = tuple(outcome) + (obs.state,)
        counts[key] = counts.get(key, 0) + 1
    return {k: v / episodes for k, v in counts.items()}


def total_variation(p, q):
    """Half the L1 distance between two outcome distributions."""
    keys = set(p) | set(q)
    diff = sum(abs(p.get(k, 0) - q.get(k, 0)) for k in keys)
    return diff / 2
