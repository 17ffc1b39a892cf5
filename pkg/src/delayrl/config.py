"""Experiment configuration: schema, validation, and object construction.

Configs are YAML (JSON works too) with explicit seeds and a version field.
All defaults are resolved up front so a run's resolved config, and hence
its hash, pins everything the artifacts depend on.
"""

import hashlib
import json

import yaml

from . import agents
from .delays import build_delay_process
from .envs import coin_mdp, mdp_from_config, random_mdp
from .layer import LayerConfig
from .model import ExactDistributionModel, TabularCritic

CONFIG_VERSION = 1

_AGENT_KINDS = ("adaptive", "constant-delay", "passthrough")
_POLICIES = ("distribution", "random", "myopic")


class ConfigError(ValueError):
    """Bad experiment configuration; message says what and where."""


def load_config(path):
    try:
        with open(path) as fh:
            data = yaml.safe_load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except yaml.YAMLError as exc:
        raise ConfigError(f"config {path} is not valid YAML: {exc}") from exc
    return parse_config(data)


def parse_config(data):
    """Validate and normalize a raw config mapping into a resolved dict."""
    if not isinstance(data, dict):
        raise ConfigError("config must be a mapping")
    if data.get("version") != CONFIG_VERSION:
        raise ConfigError(
            f"config version must be {CONFIG_VERSION}, got {data.get('version')!r}"
        )
    for key in ("seed", "environment", "delay", "layer", "agent", "schedule"):
        if key not in data:
            raise ConfigError(f"config missing required key {key!r}")
    if not isinstance(data["seed"], int):
        raise ConfigError("seed must be an explicit integer")

    resolved = {
        "version": CONFIG_VERSION,
        "seed": data["seed"],
        "environment": dict(data["environment"]),
        "delay": dict(data["delay"]),
        "layer": dict(data["layer"]),
        "agent": _resolve_agent(dict(data["agent"])),
        "schedule": _resolve_schedule(dict(data["schedule"])),
        "output": dict(data.get("output", {})),
    }

    # construct everything once so bad specs fail at load time
    mdp = build_mdp(resolved["environment"])
    prototype = build_delay_process(resolved["delay"])
    layer = resolved["layer"]
    layer.setdefault("initial_action", 0)
    layer.setdefault("max_rows", prototype.worst_case_horizon)
    if not isinstance(layer.get("horizon"), int) or layer["horizon"] < 1:
        raise ConfigError("layer.horizon must be an integer >= 1")
    if resolved["agent"]["kind"] == "constant-delay":
        if layer["max_rows"] < layer["horizon"]:
            raise ConfigError(
                "constant-delay packets need layer.max_rows >= layer.horizon"
            )
    if not 0 <= layer["initial_action"] < mdp.n_actions:
        raise ConfigError("layer.initial_action outside the action space")
    return resolved


def _resolve_agent(agent):
    kind = agent.get("kind")
    if kind not in _AGENT_KINDS:
        raise ConfigError(f"unknown agent kind {kind!r}; known: {_AGENT_KINDS}")
    default_policy = "random" if kind == "passthrough" else "distribution"
    agent.setdefault("policy", default_policy)
    if agent["policy"] not in _POLICIES:
        raise ConfigError(f"unknown policy {agent['policy']!r}")
    if kind == "adaptive" and agent["policy"] != "distribution":
        raise ConfigError("the adaptive agent always uses the distribution policy")
    if kind == "passthrough" and agent["policy"] == "distribution":
        raise ConfigError("passthrough agents use random or myopic policies")
    uses_critic = agent["policy"] == "distribution"
    agent.setdefault("train", uses_critic)
    if agent["train"] and not uses_critic:
        raise ConfigError("only distribution-policy agents train a critic")
    agent.setdefault("critic", "zeros" if agent["train"] else "truthful")
    agent.setdefault("epsilon", 0.3 if agent["train"] else 0.0)
    agent.setdefault("epsilon_decay", 0.99)
    agent.setdefault("min_epsilon", 0.01)
    agent.setdefault("learning_rate", 0.1)
    agent.setdefault("discount", 0.95)
    return agent


def _resolve_schedule(schedule):
    for key in ("episodes", "max_steps"):
        if not isinstance(schedule.get(key), int) or schedule[key] < 1:
            raise ConfigError(f"schedule.{key} must be an integer >= 1")
    schedule.setdefault("eval_cadence", 0)
    schedule.setdefault("eval_episodes", 5)
    schedule.setdefault("eval_max_steps", schedule["max_steps"])
    return schedule


def build_mdp(spec):
    kind = spec.get("kind")
    if kind == "coin":
        return coin_mdp(spec.get("stickiness", 0.5))
    if kind == "random":
        return random_mdp(spec["n_states"], spec["n_actions"], spec["seed"])
    if kind == "tabular":
        return mdp_from_config(spec)
    if kind == "file":
        with open(spec["path"]) as fh:
            return mdp_from_config(yaml.safe_load(fh))
    raise ConfigError(f"unknown environment kind {kind!r}")


def build_layer_config(resolved):
    layer = resolved["layer"]
    delay_spec = resolved["delay"]
    return LayerConfig(
        horizon=layer["horizon"],
        max_rows=layer["max_rows"],
        initial_action=layer["initial_action"],
        delay_process=lambda: build_delay_process(delay_spec),
    )


def build_critic(resolved, mdp):
    """Initial (or frozen) critic table per the agent spec."""
    agent = resolved["agent"]
    if agent["policy"] != "distribution":
        return None
    source = agent["critic"]
    if source == "zeros":
        return TabularCritic(mdp.n_states, mdp.n_actions,
                             agent["learning_rate"], agent["discount"])
    if source == "truthful":
        return TabularCritic.truthful(mdp, agent["learning_rate"],
                                      agent["discount"])
    return TabularCritic.load_csv(source, agent["learning_rate"],
                                  agent["discount"])


def agent_factory(resolved, mdp):
    """Returns make_agent(critic, epsilon) for the configured agent kind."""
    agent = resolved["agent"]
    layer = resolved["layer"]
    kind = agent["kind"]
    policy_kind = agent["policy"]
    model = ExactDistributionModel(mdp) if policy_kind == "distribution" else None

    def make_agent(critic, epsilon):
        if kind == "adaptive":
            return agents.DelayAdaptiveAgent(
                model, critic, rows=layer["max_rows"],
                horizon=layer["horizon"], epsilon=epsilon,
            )
        if kind == "constant-delay":
            if policy_kind == "distribution":
                policy = agents.ConstantDelayDistributionPolicy(
                    model, critic, epsilon)
            elif policy_kind == "random":
                policy = agents.as_planned_policy(agents.RandomPolicy(mdp.n_actions))
            else:
                policy = agents.as_planned_policy(agents.MyopicPolicy(mdp))
            return agents.ConstantDelayAgent(policy, horizon=layer["horizon"])
        if policy_kind == "random":
            policy = agents.RandomPolicy(mdp.n_actions)
        elif policy_kind == "myopic":
            policy = agents.MyopicPolicy(mdp)
        else:
            raise ConfigError("passthrough agents use random or myopic policies")
        return agents.PassthroughAgent(policy, rows=layer["max_rows"],
                                       horizon=layer["horizon"])

    return make_agent


def config_hash(resolved):
    """Stable digest of a resolved config."""
    canonical = json.dumps(resolved, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()
