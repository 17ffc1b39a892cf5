"""Exact distribution model over finite-MDP states, the policy that acts on
state distributions, and the tabular critic over undelayed states.

For finite MDPs the latent a delay-aware agent plans in can be the state
distribution itself: embedding a state is a one-hot vector, stepping is a
vector-matrix product, and emission is the identity. This realizes the
multi-step prediction model exactly (its KL gap is zero), which the tests
pin down against direct matrix products.
"""

import csv
from dataclasses import dataclass, field

import numpy as np


class ExactDistributionModel:
    """Embed / step / emit over explicit state distributions."""

    def __init__(self, mdp):
        self.n_states = mdp.n_states
        self.n_actions = mdp.n_actions
        self._p = np.asarray(mdp.transitions, dtype=float)

    def embed(self, s):
        """Dirac distribution at state s."""
        z = np.zeros(self.n_states)
        z[s] = 1.0
        return z

    def step(self, z, a):
        """Distribution after additionally applying action a."""
        return z @ self._p[a]

    def step_seq(self, z, actions):
        for a in actions:
            z = z @ self._p[a]
        return z

    def emit(self, z):
        """The represented distribution itself (exact model, nothing to decode)."""
        return z


def dist_policy(z, q_table):
    """Greedy action under a state distribution: argmax_a sum_s z(s) Q(s, a).

    Ties break toward the lowest action index, fixed for reproducibility.
    """
    return int(np.argmax(z @ q_table))


@dataclass
class TabularCritic:
    """Q-table over (undelayed state, action) with Q-learning updates."""

    n_states: int
    n_actions: int
    learning_rate: float = 0.1
    discount: float = 0.95
    q: np.ndarray = None
    updates: int = field(default=0, repr=False)

    def __post_init__(self):
        if not 0.0 < self.discount < 1.0:
            raise ValueError(f"discount must be in (0, 1), got {self.discount}")
        if self.q is None:
            self.q = np.zeros((self.n_states, self.n_actions))
        else:
            self.q = np.asarray(self.q, dtype=float)
            if self.q.shape != (self.n_states, self.n_actions):
                raise ValueError(f"q must be ({self.n_states}, {self.n_actions})")

    @classmethod
    def truthful(cls, mdp, learning_rate=0.0, discount=0.95):
        """Critic whose table is the immediate reward: exact for games where
        actions do not influence the dynamics."""
        return cls(mdp.n_states, mdp.n_actions, learning_rate, discount,
                   q=np.array(mdp.rewards, dtype=float))

    def update(self, s, a, reward, next_state, terminal):
        """One Q-learning step toward r + gamma * (1 - terminal) * max_a' Q."""
        bootstrap = 0.0 if terminal else self.q[next_state].max()
        target = reward + self.discount * bootstrap
        self.q[s, a] += self.learning_rate * (target - self.q[s, a])
        self.updates += 1

    def greedy_action(self, s):
        return int(np.argmax(self.q[s]))

    def copy(self):
        return TabularCritic(self.n_states, self.n_actions, self.learning_rate,
                             self.discount, q=self.q.copy())

    def rows(self):
        """(state, action, value) triples for export and inspection."""
        return [
            (s, a, float(self.q[s, a]))
            for s in range(self.n_states)
            for a in range(self.n_actions)
        ]

    def save_csv(self, path):
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["state", "action", "value"])
            writer.writerows(self.rows())

    @classmethod
    def load_csv(cls, path, learning_rate=0.1, discount=0.95):
        entries = {}
        with open(path, newline="") as fh:
            for row in csv.DictReader(fh):
                entries[(int(row["state"]), int(row["action"]))] = float(row["value"])
        n_states = max(s for s, _ in entries) + 1
        n_actions = max(a for _, a in entries) + 1
        q = np.zeros((n_states, n_actions))
        for (s, a), v in entries.items():
            q[s, a] = v
        return cls(n_states, n_actions, learning_rate, discount, q=q)


def critic_update(critic, transition):
    """Apply one reconstructed transition to the critic, returning it.

    ``transition`` is either a ReconstructedTransition-like object or a
    (state, action, reward, next_state, terminal, ...) tuple. The recovered
    policy-input sequences ride along for policy re-evaluation but do not
    enter the tabular value update.
    """
    if isinstance(transition, tuple):
        s, a, reward, next_state, terminal = transition[:5]
    else:
        s, a, reward, next_state, terminal = (
            transition.state, transition.action, transition.reward,
            transition.next_state, transition.terminal,
        )
    critic.update(s, a, reward, next_state, terminal)
    return critic
