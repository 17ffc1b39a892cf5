"""Episode execution, trace recording and replay, transition reconstruction,
summary statistics, and trace-level audits.

A trace is a pure function of (mdp, agent parameters, layer config, seed):
rerunning with the same inputs reproduces it byte-for-byte. The hidden
per-packet delay is logged for analysis only; agents never see it.
"""

import json
from dataclasses import dataclass, field

import numpy as np

from .layer import InteractionLayer
from .protocol import ActionPacket, make_packet, origin_stamp
from .rng import stream

TRACE_VERSION = 1


@dataclass
class TraceRecord:
    """One simulator step, in the order things happened."""

    t: int
    state: object
    slots: tuple           # buffer contents before the step
    delta: int
    counter: int
    packet: ActionPacket   # the packet the agent sent this step
    delay_hidden: int      # sampled delay of that packet; not agent-visible
    applied: object        # slots[0], the action the system actually ran
    reward: float
    terminal: bool         # whether the *next* state ended the episode


@dataclass
class Trace:
    records: list
    final_obs: dict        # {"t", "state", "buffer", "delta", "counter"}
    meta: dict = field(default_factory=dict)

    def rewards(self):
        return [r.reward for r in self.records]

    def episode_return(self):
        return float(sum(r.reward for r in self.records))

    def packets_by_stamp(self):
        return {r.packet.stamp: r.packet for r in self.records}

    def dumps_jsonl(self):
        lines = [json.dumps({"kind": "trace", "version": TRACE_VERSION,
                             "meta": _jnorm(self.meta)})]
        for r in self.records:
            lines.append(json.dumps({
                "t": r.t,
                "state": _jnorm(r.state),
                "buffer": _jnorm(r.slots),
                "delta": r.delta,
                "counter": r.counter,
                "packet": {"stamp": r.packet.stamp,
                           "matrix": _jnorm(r.packet.matrix)},
                "delay_hidden": r.delay_hidden,
                "applied": _jnorm(r.applied),
                "reward": r.reward,
                "terminal": r.terminal,
            }))
        lines.append(json.dumps({"final": _jnorm(self.final_obs)}))
        return "\n".join(lines) + "\n"

    def dump_jsonl(self, path):
        with open(path, "w") as fh:
            fh.write(self.dumps_jsonl())

    @classmethod
    def loads_jsonl(cls, text):
        lines = [json.loads(line) for line in text.splitlines() if line.strip()]
        if not lines or lines[0].get("kind") != "trace":
            raise ValueError("not a trace file: missing header line")
        version = lines[0].get("version")
        if version != TRACE_VERSION:
            raise ValueError(
                f"incompatible trace version {version!r}; "
                f"this build reads version {TRACE_VERSION}"
            )
        if "final" not in lines[-1]:
            raise ValueError("truncated trace file: missing final observation")
        records = []
        for row in lines[1:-1]:
            records.append(TraceRecord(
                t=row["t"],
                state=row["state"],
                slots=_tnorm(row["buffer"]),
                delta=row["delta"],
                counter=row["counter"],
                packet=make_packet(row["packet"]["stamp"],
                                   _tnorm(row["packet"]["matrix"])),
                delay_hidden=row["delay_hidden"],
                applied=_tnorm(row["applied"]),
                reward=row["reward"],
                terminal=row["terminal"],
            ))
        final = dict(lines[-1]["final"])
        final["buffer"] = _tnorm(final["buffer"])
        return cls(records=records, final_obs=final, meta=lines[0].get("meta", {}))

    @classmethod
    def load_jsonl(cls, path):
        with open(path) as fh:
            return cls.loads_jsonl(fh.read())


def _jnorm(value):
    """Make a value JSON-ready: tuples to lists, numpy scalars to Python."""
    if isinstance(value, (tuple, list)):
        return [_jnorm(v) for v in value]
    if isinstance(value, dict):
        return {k: _jnorm(v) for k, v in value.items()}
    if isinstance(value, np.generic):
        return value.item()
    return value


def _tnorm(value):
    """Inverse-ish of _jnorm for comparisons: lists back to tuples."""
    if isinstance(value, list):
        return tuple(_tnorm(v) for v in value)
    return value


def run_episode(mdp, agent, config, seed, max_steps):
    """Roll one episode: the agent answers each observation with a packet.

    Stops at a terminal state or after ``max_steps`` records.
    """
    if max_steps < 1:
        raise ValueError("max_steps must be >= 1")
    layer = InteractionLayer(mdp, config, seed)
    agent.reset(stream(seed, "agent"))
    obs = layer.reset()
    records = []
    terminal = False
    while not terminal and len(records) < max_steps:
        packet = agent.act(obs)
        reward, next_obs, terminal, info = layer.step(packet)
        records.append(TraceRecord(
            t=obs.stamp,
            state=obs.state,
            slots=obs.slots,
            delta=obs.delay,
            counter=obs.counter,
            packet=packet,
            delay_hidden=info["delay"],
            applied=obs.slots[0],
            reward=reward,
            terminal=terminal,
        ))
        obs = next_obs
    final_obs = {"t": obs.stamp, "state": obs.state, "buffer": obs.slots,
                 "delta": obs.delay, "counter": obs.counter}
    meta = {
        "seed": seed,
        "horizon": config.horizon,
        "max_rows": config.max_rows,
        "initial_action": config.initial_action,
        "mdp": getattr(mdp, "label", "mdp"),
        "stale_discards": layer.stale_discards,
    }
    return Trace(records=records, final_obs=final_obs, meta=meta)


@dataclass
class ReconstructedTransition:
    """Undelayed-view transition plus the recovered policy inputs.

    ``policy_input`` is the action sequence between the origin observation
    and the applied action: the guessed in-flight actions followed by the
    row entries already played out. Its length is always delta + counter.
    """

    state: object
    action: object
    reward: float
    next_state: object
    terminal: bool
    policy_input: tuple
    next_policy_input: tuple
    origin: int
    next_origin: int


def reconstruct_transitions(trace):
    """Rebuild (s, a, r, s', terminal) plus policy inputs from a trace.

    Steps whose buffer still holds the initial actions (negative origin)
    carry no recoverable policy input and are skipped.
    """
    records = trace.records
    packets = trace.packets_by_stamp()
    frames = [(r.state, r.slots, r.delta, r.counter) for r in records]
    fo = trace.final_obs
    frames.append((fo["state"], tuple(fo["buffer"]), fo["delta"], fo["counter"]))

    out = []
    for i, rec in enumerate(records):
        j = origin_stamp(i, rec.delta, rec.counter)
        if j < 0:
            continue
        y = _policy_input(frames, packets, i)
        state_next, _, delta_next, counter_next = frames[i + 1]
        j_next = origin_stamp(i + 1, delta_next, counter_next)
        y_next = _policy_input(frames, packets, i + 1)
        out.append(ReconstructedTransition(
            state=rec.state,
            action=rec.slots[0],
            reward=rec.reward,
            next_state=state_next,
            terminal=rec.terminal,
            policy_input=y,
            next_policy_input=y_next,
            origin=j,
            next_origin=j_next,
        ))
    return out


def _policy_input(frames, packets, i):
    """Action sequence between origin observation and the step-i action.

    Mirrors generation exactly: guessed actions come from the memorized
    packets' row delta when they existed, else from the origin buffer's
    reported continuation; then the packet's own row entries as played out
    by the shifting buffer.
    """
    _, _, delta, counter = frames[i]
    j = origin_stamp(i, delta, counter)
    if j < 0:
        raise ValueError(f"step {i} still runs on initial actions")
    if j - delta < 0:
        _, slots_j, _, _ = frames[j]
        assumed = _played_out(slots_j, delta)
    else:
        assumed = tuple(packets[stamp].matrix[delta - 1][0]
                        for stamp in range(j - delta, j))
    row = packets[j].matrix[delta - 1]
    return assumed + _played_out(row, counter)


def _played_out(row, n):
    """First n actions a shifting buffer plays from ``row`` (last repeats)."""
    if n <= len(row):
        return tuple(row[:n])
    return tuple(row) + (row[-1],) * (n - len(row))


@dataclass
class ReturnStats:
    mean: float
    std: float
    returns: list
    per_step_mean: list


def return_stats(traces):
    """Mean/std of per-episode reward sums plus a per-step mean series."""
    if not traces:
        raise ValueError("need at least one trace")
    returns = [t.episode_return() for t in traces]
    shortest = min(len(t.records) for t in traces)
    per_step = [
        float(np.mean([t.records[i].reward for t in traces]))
        for i in range(shortest)
    ]
    return ReturnStats(
        mean=float(np.mean(returns)),
        std=float(np.std(returns)),
        returns=returns,
        per_step_mean=per_step,
    )


@dataclass
class OriginAudit:
    checked: int
    violations: list  # (t, reason)

    @property
    def ok(self):
        return not self.violations


def audit_buffer_origin(trace):
    """Check every step's buffer against the packet that must have filled it.

    Either the buffer is still initial, or the packet stamped
    t - (delta + counter) exists and the slots equal its row ``delta``
    shifted ``counter`` times (last slot repeating).
    """
    h = trace.meta["horizon"]
    a_init = _tnorm(trace.meta["initial_action"])
    packets = trace.packets_by_stamp()
    frames = [(r.t, r.slots, r.delta, r.counter) for r in trace.records]
    fo = trace.final_obs
    frames.append((fo["t"], tuple(fo["buffer"]), fo["delta"], fo["counter"]))

    violations = []
    for t, slots, delta, counter in frames:
        j = origin_stamp(t, delta, counter)
        if j < 0:
            if slots != (a_init,) * h:
                violations.append((t, "initial buffer altered"))
            continue
        packet = packets.get(j)
        if packet is None:
            violations.append((t, f"no sent packet stamped {j}"))
            continue
        if delta > packet.rows:
            violations.append((t, f"delta {delta} exceeds packet rows"))
            continue
        row = packet.matrix[delta - 1]
        expect = tuple(row[min(counter + i, h - 1)] for i in range(h))
        if slots != expect:
            violations.append((t, "slots are not the shifted packet row"))
    return OriginAudit(checked=len(frames), violations=violations)


@dataclass
class GuessAudit:
    checked: int
    mismatch_steps: list   # send-steps with at least one wrong guess
    guess_count: int
    wrong_guesses: int

    @property
    def mismatch_rate(self):
        return self.wrong_guesses / self.guess_count if self.guess_count else 0.0


def audit_memorized_guesses(trace):
    """Compare the delay-k guesses about applied actions with what ran.

    For each send step t whose packet realized delay k (known in
    hindsight), the guesses are the first entries of row k of the packets
    stamped t-k .. t-1; they claim to be the actions applied at steps
    t .. t+k-1. Steps without a full packet window or without row k are
    not checkable and are skipped.
    """
    records = trace.records
    packets = trace.packets_by_stamp()
    horizon = len(records)
    checked = 0
    guess_count = 0
    wrong = 0
    mismatch_steps = []
    for t, rec in enumerate(records):
        k = rec.delay_hidden
        if t - k < 0 or t + k - 1 >= horizon:
            continue
        window = [packets[s] for s in range(t - k, t)]
        if any(p.rows < k for p in window):
            continue
        checked += 1
        bad = False
        for i, p in enumerate(window):
            guess_count += 1
            if p.matrix[k - 1][0] != records[t + i].applied:
                wrong += 1
                bad = True
        if bad:
            mismatch_steps.append(t)
    return GuessAudit(checked=checked, mismatch_steps=mismatch_steps,
                      guess_count=guess_count, wrong_guesses=wrong)


def delay_change_steps(trace):
    """Send steps where the sampled delay differs from the previous one."""
    delays = [r.delay_hidden for r in trace.records]
    return {t for t in range(1, len(delays)) if delays[t] != delays[t - 1]}


@dataclass
class TagAudit:
    on_time: int
    wrong_time: list       # (step, tag) applied at a step != its tag
    untagged_after: list   # steps past the first tagged application with no tag

    @property
    def ok(self):
        return not self.wrong_time and not self.untagged_after


def audit_target_tags(trace):
    """Verify (action, target_step) tags: each runs exactly at its target."""
    first_tagged = None
    on_time = 0
    wrong_time = []
    untagged = []
    for rec in trace.records:
        applied = rec.applied
        tag = applied[1] if isinstance(applied, tuple) and len(applied) == 2 else None
        if tag is not None:
            if first_tagged is None:
                first_tagged = rec.t
            if tag == rec.t:
                on_time += 1
            else:
                wrong_time.append((rec.t, tag))
        elif first_tagged is not None:
            untagged.append(rec.t)
    return TagAudit(on_time=on_time, wrong_time=wrong_time,
                    untagged_after=untagged)
