"""Shared stubs for driving the simulator down chosen branches."""

import pytest

from delayrl.envs import coin_mdp
from delayrl.layer import LayerConfig
from delayrl.protocol import make_packet


class ScriptedDelay:
    """Delay process popping preset values."""

    def __init__(self, seq):
        self.seq = list(seq)
        self.low_horizon = min(self.seq) if self.seq else 1
        self.worst_case_horizon = max(self.seq) if self.seq else 1

    def sample(self, rng):
        return self.seq.pop(0)


class CountingAgent:
    """Sends rows×width packets whose entries encode (stamp, row, column).

    Entry = stamp * 10_000 + row * 100 + column (1-based row/column), which
    makes install/shift behavior fully observable from the buffer contents.
    """

    def __init__(self, rows, width):
        self.rows = rows
        self.width = width

    def reset(self, rng):
        pass

    def act(self, obs):
        return make_packet(obs.stamp, [
            tuple(obs.stamp * 10_000 + (i + 1) * 100 + (j + 1)
                  for j in range(self.width))
            for i in range(self.rows)
        ])


class AnyActionMdp:
    """One-state MDP accepting arbitrary opaque actions (reward 0)."""

    n_states = 1
    n_actions = 1
    label = "any-action"

    def is_terminal(self, s):
        return False

    def reward(self, s, a):
        return 0.0

    def sample_initial(self, rng):
        return 0

    def sample_next(self, s, a, rng):
        return 0


@pytest.fixture
def fair_coin():
    return coin_mdp(0.5)


def layer_config(horizon, max_rows, delays, initial_action=0):
    return LayerConfig(
        horizon=horizon,
        max_rows=max_rows,
        initial_action=initial_action,
        delay_process=lambda: ScriptedDelay(list(delays)),
    )
