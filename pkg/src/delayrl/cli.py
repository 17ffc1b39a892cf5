"""Command-line front end: run experiments, sample delay traces, replay
recorded episodes.

Every command writes delimited data (CSV, JSON-lines) plus rendered PNG
figures into the output directory. Outputs are byte-stable across runs
with equal configs; there is no implicit entropy anywhere.
"""

import csv
import json
import os
from concurrent.futures import ThreadPoolExecutor

import click
import yaml

from .agents import TrainerConfig, train_agent
from .config import (
    ConfigError,
    agent_factory,
    build_critic,
    build_layer_config,
    build_mdp,
    config_hash,
    load_config,
)
from .delays import build_delay_process
from .harness import Trace, run_episode
from .rng import child_seed, stream

_TRACE_FIELDS = ("t", "state", "buffer", "delta", "counter", "packet",
                 "delay_hidden", "applied", "reward", "terminal")


class _ReplayError(click.ClickException):
    exit_code = 2


@click.group()
def main():
    """Delayed-interaction simulation toolkit."""


@main.command()
@click.option("--config", "config_path", required=True,
              type=click.Path(exists=True, dir_okay=False),
              help="Experiment config file (YAML).")
@click.option("--seed-override", type=int, default=None,
              help="Replace the config's seed.")
@click.option("--out-dir", type=click.Path(file_okay=False), default=None,
              help="Output directory (overrides output.dir in the config).")
@click.option("--jobs", type=int, default=1, show_default=True,
              help="Worker threads for independent rollout episodes.")
def run(config_path, seed_override, out_dir, jobs):
    """Run the configured experiment and write traces, CSVs, and figures."""
    try:
        resolved = load_config(config_path)
    except ConfigError as exc:
        raise click.ClickException(str(exc))
    if seed_override is not None:
        resolved["seed"] = seed_override
    out_dir = out_dir or resolved["output"].get("dir")
    if not out_dir:
        raise click.ClickException("no output directory: set --out-dir or output.dir")
    os.makedirs(out_dir, exist_ok=True)
    os.makedirs(os.path.join(out_dir, "traces"), exist_ok=True)

    mdp = build_mdp(resolved["environment"])
    layer_cfg = build_layer_config(resolved)
    make_agent = agent_factory(resolved, mdp)
    critic = build_critic(resolved, mdp)
    chash = config_hash(resolved)
    agent_cfg = resolved["agent"]
    schedule = resolved["schedule"]
    seed = resolved["seed"]
    curve = []

    if agent_cfg["train"]:
        trainer_cfg = TrainerConfig(
            episodes=schedule["episodes"],
            max_steps=schedule["max_steps"],
            learning_rate=agent_cfg["learning_rate"],
            discount=agent_cfg["discount"],
            epsilon=agent_cfg["epsilon"],
            epsilon_decay=agent_cfg["epsilon_decay"],
            min_epsilon=agent_cfg["min_epsilon"],
            eval_cadence=schedule["eval_cadence"],
            eval_episodes=schedule["eval_episodes"],
            eval_max_steps=schedule["eval_max_steps"],
        )
        result = train_agent(mdp, layer_cfg, make_agent, trainer_cfg, seed,
                             critic=critic)
        critic = result.critic
        curve = [(p.after_episode, p.mean_return, p.std_return)
                 for p in result.curve]
        traces = _rollout(
            mdp, layer_cfg, lambda: make_agent(critic, 0.0),
            seed, "final-eval", schedule["eval_episodes"],
            schedule["eval_max_steps"], jobs,
        )
        run_epsilon = 0.0
        phase = "eval"
    else:
        traces = _rollout(
            mdp, layer_cfg, lambda: make_agent(critic, agent_cfg["epsilon"]),
            seed, "rollout", schedule["episodes"], schedule["max_steps"], jobs,
        )
        run_epsilon = agent_cfg["epsilon"]
        phase = "rollout"

    agent_state = {
        "kind": agent_cfg["kind"],
        "policy": agent_cfg["policy"],
        "epsilon": run_epsilon,
        "critic": critic.rows() if critic is not None else None,
    }
    for i, trace in enumerate(traces):
        trace.meta.update({
            "experiment": resolved,
            "config_hash": chash,
            "episode": i,
            "phase": phase,
            "max_steps": (schedule["eval_max_steps"] if agent_cfg["train"]
                          else schedule["max_steps"]),
            "agent_state": agent_state,
        })
        trace.dump_jsonl(os.path.join(out_dir, "traces", f"episode_{i:04d}.jsonl"))

    returns = [t.episode_return() for t in traces]
    _write_csv(os.path.join(out_dir, "returns.csv"), ["episode", "return"],
               list(enumerate(returns)))
    if curve:
        _write_csv(os.path.join(out_dir, "curve.csv"),
                   ["after_episode", "mean_return", "std_return"], curve)
    if critic is not None:
        critic.save_csv(os.path.join(out_dir, "critic.csv"))

    mean = sum(returns) / len(returns)
    std = (sum((r - mean) ** 2 for r in returns) / len(returns)) ** 0.5
    best = max((m for _, m, _ in curve), default=mean)
    total_steps = sum(len(t.records) for t in traces)
    summary = [
        ("config_hash", chash),
        ("agent_kind", agent_cfg["kind"]),
        ("environment", resolved["environment"]["kind"]),
        ("delay_kind", resolved["delay"]["kind"]),
        ("episodes", len(traces)),
        ("total_steps", total_steps),
        ("mean_return", mean),
        ("std_return", std),
        ("best_mean_return", best),
        ("stale_discards", sum(t.meta["stale_discards"] for t in traces)),
    ]
    _write_csv(os.path.join(out_dir, "summary.csv"), ["metric", "value"], summary)

    from . import plots
    if curve:
        plots.save_learning_curve(curve, os.path.join(out_dir, "learning_curve.png"))
    plots.save_return_series(returns, os.path.join(out_dir, "returns.png"))

    click.echo(f"wrote {len(traces)} trace(s) to {out_dir}")
    click.echo(f"mean return {mean:.4f} (std {std:.4f}); best {best:.4f}")


def _rollout(mdp, layer_cfg, make_agent, seed, label, episodes, max_steps, jobs):
    def one(i):
        return run_episode(mdp, make_agent(), layer_cfg,
                           child_seed(seed, label, i), max_steps)

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(one, range(episodes)))
    return [one(i) for i in range(episodes)]


def _write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)


@main.command("delay-trace")
@click.option("--spec", required=True,
              help="Delay process spec: YAML/JSON string or a file path.")
@click.option("-n", "--samples", type=int, required=True,
              help="Number of delays to sample.")
@click.option("--seed", type=int, required=True)
@click.option("--out-dir", type=click.Path(file_okay=False), required=True)
def delay_trace(spec, samples, seed, out_dir):
    """Sample a delay process and export CSVs plus histogram/series figures."""
    try:
        process = build_delay_process(_parse_spec(spec))
    except ValueError as exc:
        raise click.ClickException(str(exc))
    if samples < 0:
        raise click.ClickException("sample count must be >= 0")
    os.makedirs(out_dir, exist_ok=True)
    rng = stream(seed, "delay-trace")
    delays = [process.sample(rng) for _ in range(samples)]

    _write_csv(os.path.join(out_dir, "delays.csv"), ["step", "delay"],
               list(enumerate(delays)))
    if delays:
        lo, hi = min(delays), max(delays)
        counts = {d: 0 for d in range(lo, hi + 1)}
        for d in delays:
            counts[d] += 1
        hist_rows = sorted(counts.items())
    else:
        hist_rows = []
    _write_csv(os.path.join(out_dir, "histogram.csv"), ["delay", "count"],
               hist_rows)

    from . import plots
    plots.save_delay_histogram(delays, os.path.join(out_dir, "delay_histogram.png"))
    plots.save_delay_series(delays, os.path.join(out_dir, "delay_time_series.png"))
    click.echo(f"wrote {samples} delay sample(s) to {out_dir}")


def _parse_spec(text):
    if os.path.exists(text):
        with open(text) as fh:
            return yaml.safe_load(fh)
    try:
        parsed = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise click.ClickException(f"bad delay spec: {exc}")
    if not isinstance(parsed, dict):
        raise click.ClickException(
            f"delay spec must be a mapping or a config file path, got {text!r}"
        )
    return parsed


@main.command()
@click.argument("trace_file", type=click.Path(exists=True, dir_okay=False))
def replay(trace_file):
    """Re-simulate a recorded trace from its seeds and report mismatches."""
    try:
        recorded = Trace.load_jsonl(trace_file)
    except (ValueError, json.JSONDecodeError) as exc:
        raise _ReplayError(f"cannot read trace: {exc}")
    meta = recorded.meta
    for key in ("experiment", "seed", "max_steps", "agent_state"):
        if key not in meta:
            raise _ReplayError(f"trace lacks {key!r}; it was not written by 'run'")

    resolved = meta["experiment"]
    try:
        mdp = build_mdp(resolved["environment"])
        layer_cfg = build_layer_config(resolved)
        make_agent = agent_factory(resolved, mdp)
    except (ConfigError, ValueError) as exc:
        raise _ReplayError(f"cannot rebuild experiment: {exc}")
    state = meta["agent_state"]
    critic = None
    if state.get("critic") is not None:
        from .model import TabularCritic
        critic = TabularCritic(mdp.n_states, mdp.n_actions)
        for s, a, v in state["critic"]:
            critic.q[s, a] = v
    agent = make_agent(critic, state["epsilon"])
    rerun = run_episode(mdp, agent, layer_cfg, meta["seed"], meta["max_steps"])

    original = recorded.dumps_jsonl().splitlines()[1:]
    fresh = rerun.dumps_jsonl().splitlines()[1:]
    ok = True
    if len(original) != len(fresh):
        click.echo(f"length: MISMATCH ({len(original)} vs {len(fresh)} lines)")
        ok = False
    n = min(len(original), len(fresh))
    old_rows = [json.loads(line) for line in original[:n]]
    new_rows = [json.loads(line) for line in fresh[:n]]
    for field in _TRACE_FIELDS:
        bad = [i for i, (a, b) in enumerate(zip(old_rows, new_rows))
               if "final" not in a and a.get(field) != b.get(field)]
        if bad:
            ok = False
            click.echo(f"{field}: MISMATCH at {len(bad)} step(s), first at t={bad[0]}")
        else:
            click.echo(f"{field}: OK")
    if old_rows and "final" in old_rows[-1]:
        match = old_rows[-1] == new_rows[-1]
        click.echo(f"final: {'OK' if match else 'MISMATCH'}")
        ok = ok and match
    if not ok:
        raise SystemExit(1)
    click.echo("replay verified: all fields match")


if __name__ == "__main__":
    main()
