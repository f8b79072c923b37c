"""Learned communication on the hats and switch riddles.

Recurrent Q-learning agents (with weight sharing, last-action inputs, and
replay-free updates), hand-coded reference protocols with exact expected
values, a tabular baseline, curriculum training over the agent count, and
trace analysis tooling.
"""

__version__ = "0.1.0"

from .curriculum import CurriculumState, sample_n, sampling_weights, update_and_promote
from .env import (
    EpisodeTrace,
    HatColour,
    SwitchAction,
    TraceStep,
    default_d_max,
    hats_reset,
    hats_step,
    read_traces_jsonl,
    switch_reset,
    switch_step,
    write_traces_jsonl,
)
from .errors import (
    AlignmentError,
    BoundsError,
    DataError,
    EmptyInputError,
    InvalidConfigError,
    NotTerminalError,
    ProtocolViolationError,
    RiddleError,
)
from .strategies import (
    counter_policy,
    exact_expected_reward,
    oracle_policy,
    parity_expected_reward,
    parity_policy,
    tell_on_last_day_policy,
    verify_parity_optimality,
)
from .training import (
    CurriculumConfig,
    MetricsRow,
    TrainConfig,
    TrainResult,
    VariantFlags,
    build_model,
    epsilon_for,
    evaluate,
    generate_traces,
    train,
)
