"""Finite MDPs used as the controlled system, plus the action-noise wrapper
for continuous-action test environments.

States and actions are integer indices. Terminal states absorb with zero
reward; stepping one is an error surfaced by ``mdp_step``.
"""

import bisect
from dataclasses import dataclass, field

import numpy as np

from .rng import stream

_ROW_TOL = 1e-12


@dataclass
class FiniteMdp:
    """Tabular MDP: per-action transition matrices, rewards, start law.

    ``transitions`` has shape (n_actions, n_states, n_states) with
    row-stochastic rows; ``rewards`` has shape (n_states, n_actions).
    Immutable after construction; sampling takes explicit generators, so
    episodes can run in parallel.
    """

    transitions: np.ndarray
    rewards: np.ndarray
    initial: np.ndarray
    terminal: np.ndarray = None
    label: str = "mdp"
    _cum: list = field(init=False, repr=False)
    _init_cum: list = field(init=False, repr=False)

    def __post_init__(self):
        self.transitions = np.asarray(self.transitions, dtype=float)
        self.rewards = np.asarray(self.rewards, dtype=float)
        self.initial = np.asarray(self.initial, dtype=float)
        if self.transitions.ndim != 3 or (
            self.transitions.shape[1] != self.transitions.shape[2]
        ):
            raise ValueError(
                f"transitions must be (A, S, S), got {self.transitions.shape}"
            )
        n_actions, n_states, _ = self.transitions.shape
        if self.rewards.shape != (n_states, n_actions):
            raise ValueError(
                f"rewards must be (S, A) = ({n_states}, {n_actions}), "
                f"got {self.rewards.shape}"
            )
        if self.initial.shape != (n_states,):
            raise ValueError(f"initial must have length {n_states}")
        if self.terminal is None:
            self.terminal = np.zeros(n_states, dtype=bool)
        self.terminal = np.asarray(self.terminal, dtype=bool)
        if self.terminal.shape != (n_states,):
            raise ValueError(f"terminal must have length {n_states}")
        row_sums = self.transitions.sum(axis=2)
        if np.abs(row_sums - 1.0).max() > _ROW_TOL:
            raise ValueError("transition rows must sum to 1")
        if abs(self.initial.sum() - 1.0) > _ROW_TOL or self.initial.min() < 0:
            raise ValueError("initial distribution must be a probability vector")
        # cumulative rows as plain lists: cheap bisect sampling in hot loops
        self._cum = [
            [list(np.cumsum(self.transitions[a, s])) for s in range(n_states)]
            for a in range(n_actions)
        ]
        self._init_cum = list(np.cumsum(self.initial))

    @property
    def n_states(self):
        return self.transitions.shape[1]

    @property
    def n_actions(self):
        return self.transitions.shape[0]

    def is_terminal(self, s):
        return bool(self.terminal[s])

    def reward(self, s, a):
        return float(self.rewards[s, a])

    def sample_initial(self, rng):
        i = bisect.bisect_right(self._init_cum, rng.random())
        return min(i, self.n_states - 1)

    def sample_next(self, s, a, rng):
        row = self._cum[a][s]
        i = bisect.bisect_right(row, rng.random())
        return min(i, self.n_states - 1)


def mdp_step(mdp, s, a, rng):
    """One undelayed step: (next state, reward, terminal flag)."""
    if mdp.is_terminal(s):
        raise ValueError(f"cannot step terminal state {s}")
    reward = mdp.reward(s, a)
    nxt = mdp.sample_next(s, a, rng)
    return nxt, reward, mdp.is_terminal(nxt)


def coin_mdp(stickiness=0.5):
    """Two-state guessing game: reward 1 iff the action names the current face.

    The face persists with probability ``stickiness`` regardless of the
    action, so delayed play degrades exactly with the chain's k-step
    persistence. stickiness=0.5 is a fair coin; 1.0 is frozen.
    """
    if not 0.0 <= stickiness <= 1.0:
        raise ValueError(f"stickiness must be in [0, 1], got {stickiness}")
    q = float(stickiness)
    flip = np.array([[q, 1.0 - q], [1.0 - q, q]])
    transitions = np.stack([flip, flip])  # action never affects the face
    rewards = np.array([[1.0, 0.0], [0.0, 1.0]])
    initial = np.array([0.5, 0.5])
    return FiniteMdp(transitions, rewards, initial,
                     label=f"coin(stickiness={q})")


def random_mdp(n_states, n_actions, seed):
    """Seeded random MDP fixture: row-stochastic dynamics, rewards in [0, 1]."""
    if n_states < 2 or n_actions < 1:
        raise ValueError("need n_states >= 2 and n_actions >= 1")
    rng = stream(seed, "random-mdp")
    transitions = rng.random((n_actions, n_states, n_states))
    transitions /= transitions.sum(axis=2, keepdims=True)
    rewards = rng.random((n_states, n_actions))
    initial = rng.random(n_states)
    initial /= initial.sum()
    return FiniteMdp(transitions, rewards, initial,
                     label=f"random({n_states},{n_actions},seed={seed})")


def mdp_from_config(cfg):
    """Load a tabular MDP from a plain mapping (regression fixtures)."""
    required = {"transitions", "rewards", "initial"}
    missing = required - set(cfg)
    if missing:
        raise ValueError(f"mdp config missing keys: {sorted(missing)}")
    return FiniteMdp(
        transitions=np.asarray(cfg["transitions"], dtype=float),
        rewards=np.asarray(cfg["rewards"], dtype=float),
        initial=np.asarray(cfg["initial"], dtype=float),
        terminal=np.asarray(cfg["terminal"], dtype=bool) if "terminal" in cfg else None,
        label=cfg.get("label", "tabular"),
    )


class TaggedMdp:
    """Wrapper accepting (action, tag) pairs and stepping on the bare action.

    Lets audits thread provenance tags through the interaction protocol,
    which never inspects action values.
    """

    def __init__(self, base):
        self.base = base
        self.label = f"tagged({base.label})"

    @staticmethod
    def untag(a):
        return a[0] if isinstance(a, tuple) else a

    @property
    def n_states(self):
        return self.base.n_states

    @property
    def n_actions(self):
        return self.base.n_actions

    def is_terminal(self, s):
        return self.base.is_terminal(s)

    def reward(self, s, a):
        return self.base.reward(s, self.untag(a))

    def sample_initial(self, rng):
        return self.base.sample_initial(rng)

    def sample_next(self, s, a, rng):
        return self.base.sample_next(s, self.untag(a), rng)


@dataclass
class NoiseSpec:
    """Action-noise setup: factor scaling the per-component span plus bounds."""

    factor: float
    low: np.ndarray
    high: np.ndarray

    def __post_init__(self):
        if self.factor < 0:
            raise ValueError(f"noise factor must be >= 0, got {self.factor}")
        self.low = np.asarray(self.low, dtype=float)
        self.high = np.asarray(self.high, dtype=float)
        if np.any(self.low >= self.high):
            raise ValueError("each component needs low < high")


def apply_noise(action, spec, rng):
    """Disturb a continuous action in place of the agent's intent.

    Per component: add factor * (high - low) * xi with xi standard normal,
    then clip back into bounds. The input must already be within bounds.
    """
    a = np.asarray(action, dtype=float)
    if np.any(a < spec.low) or np.any(a > spec.high):
        raise ValueError("action outside bounds")
    if spec.factor == 0.0:
        return a.copy()
    xi = rng.standard_normal(a.shape)
    noisy = a + spec.factor * (spec.high - spec.low) * xi
    return np.clip(noisy, spec.low, spec.high)
