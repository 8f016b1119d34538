"""Deterministic symbolic household simulator, task/corpus data engine,
and multi-turn evaluation harness."""

from .actions import Action, Verb, parse_action_text
from .catalog import Catalog, ObjectAttr
from .errors import HouseworldError
from .harness import (
    Limits,
    NoisyOracleAgent,
    OracleAgent,
    RandomAgent,
    parse_decision,
    run_episode,
)
from .metrics import (
    MetricsReport,
    aggregate,
    judge,
    repetitive_exploration_rate,
    search_efficiency,
    task_completeness,
)
from .planner import (
    KeyActionSequence,
    SearchPolicy,
    derive_key_actions,
    first_divergence,
    insert_search_process,
)
from .scene import Scene, SceneSpec, generate_scene, load_scene, save_scene
from .simulator import Episode, Observation, final_state_check
from .tasks import TaskInstruction, synthesize_tasks
from .thoughts import Thought, annotate, default_transition_model
from .trajectory import Trajectory, TrajectoryRecord

__version__ = "0.1.0"

__all__ = [
    "Action", "Verb", "parse_action_text",
    "Catalog", "ObjectAttr",
    "HouseworldError",
    "Limits", "NoisyOracleAgent", "OracleAgent", "RandomAgent",
    "parse_decision", "run_episode",
    "MetricsReport", "aggregate", "judge", "repetitive_exploration_rate",
    "search_efficiency", "task_completeness",
    "KeyActionSequence", "SearchPolicy", "derive_key_actions",
    "first_divergence", "insert_search_process",
    "Scene", "SceneSpec", "generate_scene", "load_scene", "save_scene",
    "Episode", "Observation", "final_state_check",
    "TaskInstruction", "synthesize_tasks",
    "Thought", "annotate", "default_transition_model",
    "Trajectory", "TrajectoryRecord",
]
