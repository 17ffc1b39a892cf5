"""Deterministic simulator and tabular agents for reinforcement learning
under random, unobservable interaction delays."""

from .protocol import (
    STALE,
    ActionBuffer,
    ActionPacket,
    ObservationPacket,
    make_packet,
    origin_stamp,
    select_row,
    shift_buffer,
)
from .delays import (
    CategoricalDelay,
    ConstantDelay,
    GilbertElliotDelay,
    MM1QueueDelay,
    build_delay_process,
    ge_params,
)
from .envs import (
    FiniteMdp,
    NoiseSpec,
    TaggedMdp,
    apply_noise,
    coin_mdp,
    mdp_from_config,
    mdp_step,
    random_mdp,
)
from .layer import InteractionLayer, InteractionState, LayerConfig, is_initial_buffer, transmit
from .model import ExactDistributionModel, TabularCritic, critic_update, dist_policy
from .agents import (
    ConstantDelayAgent,
    ConstantDelayDistributionPolicy,
    DelayAdaptiveAgent,
    DistributionPolicy,
    MyopicPolicy,
    PacketMemory,
    PassthroughAgent,
    RandomPolicy,
    TrainerConfig,
    adaptive_packet,
    as_planned_policy,
    constant_lag_packet,
    evaluate_agent,
    memorized_action_selection,
    passthrough_packet,
    train_agent,
)
from .harness import (
    Trace,
    TraceRecord,
    ReconstructedTransition,
    audit_buffer_origin,
    audit_memorized_guesses,
    audit_target_tags,
    delay_change_steps,
    reconstruct_transitions,
    return_stats,
    run_episode,
)
from .oracle import (
    TinySpec,
    enumerate_outcomes,
    monte_carlo_distribution,
    simulator_distribution,
    total_variation,
)
from .rng import child_seed, exponential, stream

__version__ = "0.1.0"
