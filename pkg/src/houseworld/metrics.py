"""Replay-based trajectory judging and the four evaluation metrics.

Success requires both that the key actions appear in order among the
predicted interaction actions (matched by (verb, target-class), with
Observe/MoveForward excluded) and that the final world state satisfies
every task goal in instruction order. Search efficiency, task
completeness, and the repetitive exploration rate quantify how much
wandering surrounded the key actions.
"""

from dataclasses import dataclass, field
from fractions import Fraction

from .actions import INTERACTION_VERBS, Verb
from .errors import HouseworldError, SceneMismatch, ZeroPredicted
from .planner import _action_sig, key_subsequence_progress
from .simulator import Episode, final_state_check


@dataclass
class EpisodeResult:
    task_id: str
    predicted_actions: list
    outcomes: list  # StepOutcome per predicted action
    ended: bool
    success: bool
    category: str = None
    key_length: int = 0
    reasons: list = field(default_factory=list)
    search_efficiency: float = None
    task_completeness: float = None
    rer: float = None
    navigations: list = field(default_factory=list)
    infrastructure_failed: bool = False

    def validate(self):
        if self.success and not self.ended:
            raise HouseworldError("success implies a terminated episode")
        if len(self.outcomes) != len(self.predicted_actions):
            raise HouseworldError("one outcome per predicted action")
        return self


@dataclass
class MetricsReport:
    """Aggregate metrics; efficiency/completeness are averaged over
    successful episodes only (per-episode raw values are kept), which is
    recorded in the header note alongside the all-episode variants."""

    success_rate: float
    search_efficiency: float
    task_completeness: float
    rer: float
    per_category: dict
    n_episodes: int
    n_success: int
    search_efficiency_all: float = None
    task_completeness_all: float = None
    note: str = "efficiency/completeness averaged over successful episodes"

    def to_dict(self):
        return {
            "success_rate": self.success_rate,
            "search_efficiency": self.search_efficiency,
            "task_completeness": self.task_completeness,
            "rer": self.rer,
            "per_category": self.per_category,
            "n_episodes": self.n_episodes,
            "n_success": self.n_success,
            "search_efficiency_all": self.search_efficiency_all,
            "task_completeness_all": self.task_completeness_all,
            "note": self.note,
        }


def search_efficiency(key_len, predicted_len):
    """key_len / predicted_len clamped to [0, 1]; exact rational input
    welcome (ints divide via Fraction to avoid float drift)."""
    if predicted_len < 1:
        raise ZeroPredicted("predicted sequence is empty")
    value = Fraction(key_len, predicted_len)
    return float(min(value, Fraction(1)))


def task_completeness(key_sigs, predicted_actions, scene=None):
    """Fraction of predicted actions whose (verb, target-class) signature
    belongs to the key-action set."""
    if not predicted_actions:
        raise ZeroPredicted("predicted sequence is empty")
    key_set = set(key_sigs)
    hits = sum(
        1 for a in predicted_actions if _action_sig(a, scene) in key_set
    ) if scene is not None else sum(
        1 for a in predicted_actions if (a.verb, a.target) in key_set
    )
    return float(Fraction(hits, len(predicted_actions)))


def repetitive_exploration_rate(navigations):
    """Revisits to previously navigated locations over total navigations."""
    if not navigations:
        return 0.0
    seen = set()
    revisits = 0
    for loc in navigations:
        if loc in seen:
            revisits += 1
        seen.add(loc)
    return float(Fraction(revisits, len(navigations)))


@dataclass
class JudgeVerdict:
    success: bool
    reasons: list = field(default_factory=list)


def judge(task, key, predicted_actions, scene) -> JudgeVerdict:
    """Replay the prediction and check key-subsequence plus final state."""
    ep = Episode(scene, task=task, step_limit=10 ** 9)
    ep.reset()
    for action in predicted_actions:
        ep.step(action)
        if ep.ended:
            break
    reasons = []
    key_sigs = [_action_sig(a, scene) for a in key.actions]
    progress = key_subsequence_progress(key.actions, predicted_actions, scene)
    if progress < len(key_sigs):
        missing = key_sigs[progress]
        reasons.append(
            f"MissingKeyAction:{missing[0].value}"
            + (f" {missing[1]}" if missing[1] else "")
        )
    if not ep.ended:
        reasons.append("NoTermination")
    state_ok = final_state_check(ep, task)
    if not state_ok:
        for i, goal in enumerate(task.goal):
            if not ep.goal_holds(goal):
                reasons.append(f"GoalUnmet:{i}:{goal.kind}")
        steps = [ep.goal_steps.get(i) for i in range(len(task.goal))]
        known = [s for s in steps if s is not None]
        if all(ep.goal_holds(g) for g in task.goal) and (
            None in steps or any(a > b for a, b in zip(known, known[1:]))
        ):
            reasons.append("GoalOrderViolated")
    return JudgeVerdict(success=not reasons, reasons=reasons)


def evaluate_episode(task, key, predicted_actions, outcomes, scene,
                     category=None) -> EpisodeResult:
    verdict = judge(task, key, predicted_actions, scene)
    ended = any(
        a.verb == Verb.END and o.ok for a, o in zip(predicted_actions, outcomes)
    )
    navigations = [
        a.target for a, o in zip(predicted_actions, outcomes)
        if a.verb == Verb.NAVIGATE_TO and o.ok
    ]
    result = EpisodeResult(
        task_id=task.id,
        predicted_actions=list(predicted_actions),
        outcomes=list(outcomes),
        ended=ended,
        success=verdict.success,
        category=category or task.category,
        key_length=len(key.actions),
        reasons=verdict.reasons,
        rer=repetitive_exploration_rate(navigations),
        navigations=navigations,
    )
    if predicted_actions:
        result.search_efficiency = search_efficiency(
            len(key.actions), len(predicted_actions)
        )
        key_sigs = [_action_sig(a, scene) for a in key.actions]
        result.task_completeness = task_completeness(
            key_sigs, predicted_actions, scene
        )
    return result.validate()


def _mean(values):
    values = [v for v in values if v is not None]
    return sum(values) / len(values) if values else 0.0


def aggregate(results) -> MetricsReport:
    results = [r for r in results if not r.infrastructure_failed]
    succ = [r for r in results if r.success]
    per_category = {}
    for cat in sorted({r.category for r in results if r.category}):
        cat_results = [r for r in results if r.category == cat]
        cat_succ = [r for r in cat_results if r.success]
        per_category[cat] = {
            "n": len(cat_results),
            "success_rate": _mean([r.success for r in cat_results]),
            "search_efficiency": _mean([r.search_efficiency for r in cat_succ]),
            "task_completeness": _mean([r.task_completeness for r in cat_succ]),
            "rer": _mean([r.rer for r in cat_results]),
        }
    return MetricsReport(
        success_rate=_mean([r.success for r in results]),
        search_efficiency=_mean([r.search_efficiency for r in succ]),
        task_completeness=_mean([r.task_completeness for r in succ]),
        rer=_mean([r.rer for r in results]),
        per_category=per_category,
        n_episodes=len(results),
        n_success=len(succ),
        search_efficiency_all=_mean([r.search_efficiency for r in results]),
        task_completeness_all=_mean([r.task_completeness for r in results]),
    )


def flat_table(results):
    """One row per episode, spreadsheet-friendly."""
    rows = []
    for r in results:
        rows.append({
            "task_id": r.task_id,
            "category": r.category,
            "success": int(r.success),
            "n_predicted": len(r.predicted_actions),
            "key_length": r.key_length,
            "search_efficiency": r.search_efficiency,
            "task_completeness": r.task_completeness,
            "rer": r.rer,
            "reasons": ";".join(r.reasons),
        })
    return rows


# -- PRM filtering ------------------------------------------------------


@dataclass
class FilterReport:
    accepted: list = field(default_factory=list)  # (task, trajectory)
    rejected: list = field(default_factory=list)  # (task, trajectory, reason)


def replay_actions(trajectory):
    """Actions to execute on replay. An action immediately followed by an
    anomaly observation was a command the hardware botched: its effect
    never happened, so the replay skips it (the retry that follows is the
    one that ran)."""
    records = trajectory.records
    out = []
    for i, rec in enumerate(records):
        if rec.kind != "action":
            continue
        nxt = records[i + 1] if i + 1 < len(records) else None
        if nxt is not None and nxt.kind == "observation" \
                and nxt.provenance == "injected_anomaly":
            continue
        out.append(rec.payload)
    return out


def filter_trajectories(candidates, scenes, keys) -> FilterReport:
    """Accept (task, trajectory) pairs whose replay is all-legal and
    judged successful; reasons for rejection are machine-readable.

    `scenes` maps scene_id -> Scene; `keys` maps task_id ->
    KeyActionSequence.
    """
    report = FilterReport()
    for task, traj in candidates:
        scene = scenes.get(traj.scene_id)
        if scene is None or task.scene_id != traj.scene_id:
            raise SceneMismatch(
                f"trajectory {traj.task_id} references scene {traj.scene_id}"
            )
        key = keys[task.id]
        actions = replay_actions(traj)
        ep = Episode(scene, task=task, step_limit=10 ** 9)
        ep.reset()
        reason = None
        for i, action in enumerate(actions):
            outcome = ep.step(action)
            if not outcome.ok:
                reason = f"IllegalStep:{i}"
                break
            if ep.ended:
                break
        if reason is None and not ep.ended:
            reason = "StepLimit"
        if reason is None:
            verdict = judge(task, key, actions, scene)
            if not verdict.success:
                reason = verdict.reasons[0]
        if reason is None:
            report.accepted.append((task, traj))
        else:
            report.rejected.append((task, traj, reason))
    return report
