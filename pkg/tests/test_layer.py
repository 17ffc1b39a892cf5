import pytest
from hypothesis import given, strategies as st

from conftest import AnyActionMdp, CountingAgent, ScriptedDelay, layer_config

from delayrl.envs import mdp_from_config
from delayrl.layer import InteractionLayer, LayerConfig, is_initial_buffer, transmit
from delayrl.protocol import ActionBuffer, ObservationPacket, make_packet


def obs_of(t, delta, counter, slots=("a",), state=0):
    return ObservationPacket(stamp=t, state=state,
                             buffer=ActionBuffer(slots, delta, counter))


def test_reset_matches_initial_distribution_shape(fair_coin):
    layer = InteractionLayer(fair_coin, layer_config(3, 3, [1] * 10), seed=5)
    obs = layer.reset()
    assert obs.stamp == 0
    assert obs.delay == 1 and obs.counter == 0
    assert obs.slots == (0, 0, 0)
    assert layer.state.transit == ()
    assert is_initial_buffer(obs)


def test_reset_is_reproducible(fair_coin):
    a = InteractionLayer(fair_coin, layer_config(2, 2, [1]), seed=9).reset()
    b = InteractionLayer(fair_coin, layer_config(2, 2, [1]), seed=9).reset()
    assert a == b


def test_initial_buffer_predicate_examples():
    assert is_initial_buffer(obs_of(0, 1, 0))
    assert not is_initial_buffer(obs_of(22, 3, 2))  # origin 17 >= 0
    assert is_initial_buffer(obs_of(1, 1, 1))       # origin -1


def test_transmit_supersedes_in_flight_packets():
    t = 10
    old = make_packet(t, [("x",)])
    new = make_packet(t + 1, [("y",)])
    transit = ((t + 4, old),)
    # the newer packet arrives earlier, so the old one is discarded
    out = transmit(transit, new, delay=2, now=t + 1)
    assert out == ((t + 3, new),)


def test_transmit_into_empty_set():
    p = make_packet(0, [("a",)])
    assert transmit((), p, delay=3, now=0) == ((3, p),)


def test_transmit_keeps_strictly_earlier_arrivals():
    t = 0
    early = make_packet(0, [("e",)])
    late = make_packet(1, [("l",)])
    out = transmit(((t + 2, early),), late, delay=4, now=1)
    assert out == ((2, early), (5, late))


def test_transmit_rejects_nonpositive_delay():
    with pytest.raises(ValueError):
        transmit((), make_packet(0, [("a",)]), delay=0, now=0)


@given(st.lists(st.integers(1, 12), min_size=1, max_size=20))
def test_transmit_keeps_arrivals_unique_sorted_and_future(delays):
    # drive the send/pop cycle one packet per step with arbitrary delays:
    # arrivals stay strictly increasing, all in the future, and the newest
    # packet always owns the largest arrival time
    transit = ()
    for now, delay in enumerate(delays):
        packet = make_packet(now, [("a",)])
        transit = transmit(transit, packet, delay, now)
        arrivals = [arr for arr, _ in transit]
        assert arrivals == sorted(set(arrivals))
        assert all(arr > now for arr in arrivals)
        assert transit[-1][1] is packet
        if transit and transit[0][0] == now + 1:  # the layer pops on arrival
            transit = transit[1:]


def test_step_shift_when_no_arrival(fair_coin):
    layer = InteractionLayer(fair_coin, layer_config(3, 3, [5, 5, 5]), seed=1)
    obs = layer.reset()
    agent = CountingAgent(rows=3, width=3)
    _, obs1, _, info = layer.step(agent.act(obs))
    assert info["event"] == "shift"
    assert obs1.delay == 1 and obs1.counter == 1
    assert obs1.slots == (0, 0, 0)  # initial actions shifted over themselves


def test_step_installs_matching_row(fair_coin):
    # delay 2: packet sent at 0 arrives at 2, installing row 2
    layer = InteractionLayer(fair_coin, layer_config(2, 4, [2, 2, 2]), seed=2)
    obs = layer.reset()
    agent = CountingAgent(rows=4, width=2)
    _, obs1, _, i1 = layer.step(agent.act(obs))
    assert i1["event"] == "shift"
    _, obs2, _, i2 = layer.step(agent.act(obs1))
    assert i2["event"] == "install"
    assert obs2.delay == 2 and obs2.counter == 0
    assert obs2.slots == (201, 202)  # stamp 0, row 2, columns 1..2


def test_step_stale_packet_shifts_and_counts(fair_coin):
    # the packet has 1 row but arrives with delay 2: discarded as stale
    layer = InteractionLayer(fair_coin, layer_config(2, 4, [2, 2, 2]), seed=3)
    obs = layer.reset()
    agent = CountingAgent(rows=1, width=2)
    layer.step(agent.act(obs))
    obs1 = layer.state.observation
    _, obs2, _, info = layer.step(agent.act(obs1))
    assert info["event"] == "stale"
    assert layer.stale_discards == 1
    assert obs2.counter == 2 and obs2.delay == 1  # kept shifting


def test_reward_is_first_slot_on_current_state():
    mdp = mdp_from_config({
        "transitions": [
            [[0.0, 1.0], [1.0, 0.0]],   # action 0 toggles
            [[1.0, 0.0], [0.0, 1.0]],   # action 1 stays
        ],
        "rewards": [[3.0, 0.5], [0.25, 7.0]],
        "initial": [1.0, 0.0],
    })
    layer = InteractionLayer(mdp, layer_config(2, 2, [9, 9]), seed=0)
    obs = layer.reset()
    agent = CountingAgent(rows=2, width=2)
    packet = make_packet(0, [(1, 1), (1, 1)])
    reward, obs1, _, _ = layer.step(packet)
    assert reward == 3.0            # r(s_0=0, initial action 0)
    assert obs1.state == 1          # action 0 toggled the state
    reward2, _, _, _ = layer.step(agent.act(obs1))
    assert reward2 == 0.25          # r(s_1=1, shifted initial action 0)


def test_step_contract_violations(fair_coin):
    layer = InteractionLayer(fair_coin, layer_config(2, 2, [1] * 5), seed=4)
    obs = layer.reset()
    with pytest.raises(ValueError):
        layer.step(make_packet(3, [(0, 0)]))       # stamp mismatch
    with pytest.raises(ValueError):
        layer.step(make_packet(0, [(0,)]))          # wrong width
    with pytest.raises(ValueError):
        layer.step(make_packet(0, [(0, 0)] * 3))    # too many rows
    with pytest.raises(RuntimeError):
        layer.reset()                               # single-episode object


def test_terminal_ends_episode_and_discards_transit():
    mdp = mdp_from_config({
        "transitions": [[[0.0, 1.0], [0.0, 1.0]]],
        "rewards": [[1.0], [0.0]],
        "initial": [1.0, 0.0],
        "terminal": [False, True],
    })
    layer = InteractionLayer(mdp, layer_config(1, 1, [3]), seed=0)
    obs = layer.reset()
    reward, obs1, terminal, _ = layer.step(make_packet(0, [(0,)]))
    assert terminal
    assert layer.state.transit == ()
    with pytest.raises(RuntimeError):
        layer.step(make_packet(1, [(0,)]))


def test_layer_treats_actions_opaquely():
    layer = InteractionLayer(AnyActionMdp(), LayerConfig(
        horizon=2, max_rows=1, initial_action=("init", None),
        delay_process=lambda: ScriptedDelay([1, 1])), seed=0)
    obs = layer.reset()
    packet = make_packet(0, [((("x",), 7), ("y", 8))])
    _, obs1, _, info = layer.step(packet)
    assert info["event"] == "install"
    assert obs1.slots[0] == (("x",), 7)


class _ParityAgent:
    """Valid coin actions that still vary with stamp, row, and column."""

    def reset(self, rng):
        pass

    def act(self, obs):
        t = obs.stamp
        return make_packet(t, [
            tuple((t + obs.state + i + j) % 2 for j in range(2))
            for i in range(4)
        ])


def test_identical_seeds_identical_episodes(fair_coin):
    def run(seed):
        layer = InteractionLayer(
            fair_coin,
            LayerConfig(2, 4, 0, lambda: ScriptedDelay([1, 2, 1, 3, 1, 1])),
            seed=seed,
        )
        agent = _ParityAgent()
        obs = layer.reset()
        out = []
        for _ in range(6):
            reward, obs, terminal, info = layer.step(agent.act(obs))
            out.append((reward, obs, info["event"]))
        return out

    assert run(13) == run(13)
    assert run(13) != run(14)  # different seed, different coin flips
