"""Multi-turn evaluation harness: prompt rendering, decision parsing,
the interaction loop, and baseline agents.

An agent is anything with a ``reply(turns) -> str`` method (and an
optional ``begin_episode(scene, task, key)`` hook). The harness renders
each observation into the fixed prompt templates, extracts the agent's
``<DecisionMaking>`` tag, steps the simulator, and feeds back frames or
error feedback until End or a limit.
"""

import logging
import os
import random
import re
import time
from dataclasses import dataclass, field

from .actions import Action, Verb, parse_action_text
from .errors import (
    AgentTimeout,
    AuthFailure,
    EndpointUnavailable,
    HouseworldError,
    ParseError,
)
from .metrics import EpisodeResult, evaluate_episode
from .planner import derive_key_actions
from .prompts import (
    FORMAT_REMINDER,
    SYSTEM_PROMPT,
    render_initialization,
    render_interaction,
)
from .simulator import Episode
from .trajectory import Trajectory, TrajectoryRecord

log = logging.getLogger(__name__)


class DecisionParseError(ParseError):
    code = "ParseError"


class NoTag(DecisionParseError):
    code = "NoTag"


class MultipleConflictingTags(DecisionParseError):
    code = "MultipleConflictingTags"


class UnknownVerb(DecisionParseError):
    code = "UnknownVerb"


class UnknownTarget(DecisionParseError):
    code = "UnknownTarget"


@dataclass
class SessionTurn:
    role: str  # "system" | "user" | "assistant"
    text: str
    attachments: str = None  # rendered frame text, when embedded

    def to_dict(self):
        return {"role": self.role, "text": self.text,
                "attachments": self.attachments}


@dataclass
class DecisionTag:
    raw: str
    parsed: Action


_TAG_RE = re.compile(r"<DecisionMaking>(.*?)</DecisionMaking>", re.DOTALL)


def _normalize_target(action, scene):
    if action.target is None or scene is None:
        return action
    t = action.target.strip()
    if t in scene:
        return Action(action.verb, t)
    classes = list(scene._by_class)
    if t in classes:
        return Action(action.verb, t)
    folded = t.casefold().replace(" ", "")
    for name in classes:
        if name.casefold() == folded:
            return Action(action.verb, name)
    raise UnknownTarget(f"no object class matches {action.target!r}")


def parse_decision(assistant_text, scene=None) -> DecisionTag:
    """Extract the agent's final action from its reply.

    The last well-formed tag wins (text before it is free-form
    thinking); two tags that parse to different actions conflict.
    """
    if not isinstance(assistant_text, str):
        raise NoTag("reply is not text")
    matches = _TAG_RE.findall(assistant_text)
    if not matches:
        raise NoTag("no <DecisionMaking> tag in reply")
    parsed = []
    last_error = None
    for body in matches:
        try:
            action = parse_action_text(body)
            action = _normalize_target(action, scene)
            parsed.append((body, action))
        except UnknownTarget as exc:
            last_error = exc
        except ParseError as exc:
            last_error = UnknownVerb(str(exc))
        except HouseworldError as exc:
            last_error = UnknownVerb(str(exc))
    if not parsed:
        raise last_error if last_error is not None else NoTag("empty tag")
    distinct = {action for _, action in parsed}
    if len(distinct) > 1:
        raise MultipleConflictingTags(
            f"{len(distinct)} different actions tagged"
        )
    raw, action = parsed[-1]
    return DecisionTag(raw=raw, parsed=action)


@dataclass
class Limits:
    max_turns: int = 80
    step_limit: int = 40
    max_consecutive_notag: int = 3
    agent_timeout: float = None  # seconds per reply; None = unlimited


class EpisodeSession:
    """Stepwise episode state machine shared by the in-process driver
    and the network server, so both judge identically."""

    def __init__(self, scene, task, key=None, limits=None, seed=0):
        self.scene = scene
        self.task = task
        self.limits = limits or Limits()
        self.key = key if key is not None else derive_key_actions(task, scene)
        self.seed = seed
        self.ep = Episode(scene, task=task,
                          step_limit=self.limits.step_limit, seed=seed)
        _, obs0 = self.ep.reset()
        self.turns = [
            SessionTurn("system", SYSTEM_PROMPT),
            SessionTurn(
                "user",
                render_initialization(obs0.text + "\n", task.text),
                attachments=obs0.text,
            ),
        ]
        self.records = [TrajectoryRecord(kind="observation", payload=obs0,
                                         provenance="sampled")]
        self.predicted = []
        self.outcomes = []
        self.notag_streak = 0
        self.infrastructure_failed = False
        self.done = False

    def abort(self, infrastructure=False):
        self.infrastructure_failed = self.infrastructure_failed or infrastructure
        self.done = True

    def submit(self, assistant_text):
        """Consume one assistant reply; returns the new user-side turns
        (empty when the episode just finished)."""
        if self.done:
            raise HouseworldError("episode already finished")
        self.turns.append(SessionTurn("assistant", assistant_text))
        new_turns = []
        try:
            tag = parse_decision(assistant_text, self.scene)
        except DecisionParseError:
            self.notag_streak += 1
            if self.notag_streak >= self.limits.max_consecutive_notag:
                self.done = True
                return []
            turn = SessionTurn("user", FORMAT_REMINDER)
            self.turns.append(turn)
            new_turns.append(turn)
        else:
            self.notag_streak = 0
            action = tag.parsed
            outcome = self.ep.step(action)
            self.predicted.append(action)
            self.outcomes.append(outcome)
            self.records.append(TrajectoryRecord(
                kind="action", payload=action, loss_mask=True,
                provenance="sampled"))
            if self.ep.ended:
                self.done = True
                return []
            obs = outcome.observation
            if outcome.ok:
                text = render_interaction(action.render(self.scene), obs.text)
                self.records.append(TrajectoryRecord(
                    kind="observation", payload=obs, provenance="sampled"))
            else:
                text = obs.feedback_text
                self.records.append(TrajectoryRecord(
                    kind="feedback", payload=obs.feedback_text,
                    provenance="sampled"))
            turn = SessionTurn("user", text, attachments=obs.text)
            self.turns.append(turn)
            new_turns.append(turn)
        if len(self.turns) >= self.limits.max_turns:
            self.done = True
        return new_turns

    def finish(self):
        result = evaluate_episode(
            self.task, self.key, self.predicted, self.outcomes, self.scene,
        )
        result.infrastructure_failed = self.infrastructure_failed
        traj = Trajectory(
            task_id=self.task.id, scene_id=self.scene.id, seed=self.seed,
            records=self.records,
            meta={"turns": len(self.turns),
                  "infrastructure_failed": self.infrastructure_failed},
        )
        return result, traj


def run_episode(scene, task, agent, limits=None, key=None, seed=0):
    """Drive one evaluated episode; returns (EpisodeResult, Trajectory)."""
    session = EpisodeSession(scene, task, key=key, limits=limits, seed=seed)
    while not session.done:
        t0 = time.monotonic()
        try:
            reply = agent.reply(list(session.turns))
        except (EndpointUnavailable, AuthFailure):
            session.abort(infrastructure=True)
            break
        if session.limits.agent_timeout is not None \
                and time.monotonic() - t0 > session.limits.agent_timeout:
            raise AgentTimeout(
                f"agent exceeded {session.limits.agent_timeout}s")
        session.submit(reply)
    return session.finish()


# -- scripted agents ----------------------------------------------------


def _tagged(action, scene):
    return f"<DecisionMaking>{action.render(scene)}</DecisionMaking>"


class OracleAgent:
    """Replays the task's key actions verbatim."""

    def begin_episode(self, scene, task, key):
        self.scene = scene
        self.queue = list(key.actions)

    def reply(self, turns):
        if not self.queue:
            return _tagged(Action(Verb.END), self.scene)
        return _tagged(self.queue.pop(0), self.scene)


class RandomAgent:
    """Uniform choice over navigations, observe, a pickup/put guess,
    and end; a floor baseline, not a competent policy."""

    def __init__(self, seed=0):
        self.rng = random.Random(seed)

    def begin_episode(self, scene, task, key):
        self.scene = scene
        self.options = [Action(Verb.OBSERVE), Action(Verb.END)]
        for r in scene.navigable_receptacles():
            self.options.append(Action(Verb.NAVIGATE_TO, r))
            obj = scene.obj(r)
            if obj.attrs.openable:
                self.options.append(Action(Verb.OPEN, r))

    def reply(self, turns):
        return _tagged(self.rng.choice(self.options), self.scene)


class NoisyOracleAgent:
    """Oracle that, with probability p, wanders (random navigation or
    observe) instead of emitting the next key action; a feedback turn
    means the last key action did not land and is re-queued."""

    def __init__(self, p=0.3, seed=0):
        self.p = p
        self.rng = random.Random(seed)

    def begin_episode(self, scene, task, key):
        self.scene = scene
        self.queue = list(key.actions)
        self.detours = [Action(Verb.OBSERVE)] + [
            Action(Verb.NAVIGATE_TO, r)
            for r in scene.navigable_receptacles()
        ]
        self.pending = None

    def reply(self, turns):
        if self.pending is not None:
            last = turns[-1]
            if last.role == "user" and last.text.startswith("<|feedback|>"):
                self.queue.insert(0, self.pending)
            self.pending = None
        if self.queue and self.rng.random() < self.p:
            return _tagged(self.rng.choice(self.detours), self.scene)
        if not self.queue:
            return _tagged(Action(Verb.END), self.scene)
        action = self.queue.pop(0)
        self.pending = action
        return _tagged(action, self.scene)


class ReplayAgent:
    """Replays recorded assistant texts (transcript replay mode)."""

    def __init__(self, transcript):
        self.transcript = list(transcript)

    def begin_episode(self, scene, task, key):
        self.cursor = 0

    def reply(self, turns):
        if self.cursor >= len(self.transcript):
            raise HouseworldError("transcript exhausted")
        text = self.transcript[self.cursor]
        self.cursor += 1
        return text


@dataclass
class EndpointConfig:
    url: str
    model: str = ""
    api_key_env: str = "HOUSEWORLD_API_KEY"
    timeout: float = 60.0
    max_attempts: int = 3
    transcript: list = field(default_factory=list)  # appended, never keys


class ExternalModelAgent:
    """Adapter for a chat-completion style HTTP endpoint. Credentials
    come from the environment and are never logged or stored."""

    def __init__(self, config: EndpointConfig):
        self.config = config

    def begin_episode(self, scene, task, key):
        self.scene = scene

    def _post(self, payload):
        import httpx

        headers = {}
        api_key = os.environ.get(self.config.api_key_env)
        if api_key:
            headers["Authorization"] = f"Bearer {api_key}"
        delay = 1.0
        last = None
        for attempt in range(self.config.max_attempts):
            try:
                resp = httpx.post(
                    self.config.url, json=payload, headers=headers,
                    timeout=self.config.timeout,
                )
                if resp.status_code in (401, 403):
                    raise AuthFailure(f"endpoint returned {resp.status_code}")
                if resp.status_code >= 500:
                    last = EndpointUnavailable(
                        f"endpoint returned {resp.status_code}")
                    raise last
                resp.raise_for_status()
                return resp.json()
            except AuthFailure:
                raise
            except Exception as exc:  # noqa: BLE001 - retry then surface
                last = exc
                if attempt + 1 < self.config.max_attempts:
                    time.sleep(delay)
                    delay *= 2
        raise EndpointUnavailable(str(last))

    def reply(self, turns):
        messages = [
            {"role": t.role, "content": t.text} for t in turns
        ]
        payload = {"model": self.config.model, "messages": messages}
        data = self._post(payload)
        try:
            text = data["choices"][0]["message"]["content"]
        except (KeyError, IndexError, TypeError) as exc:
            raise EndpointUnavailable(f"malformed endpoint reply: {exc}")
        self.config.transcript.append(
            {"request_messages": messages, "reply": text}
        )
        return text


def external_model_agent(config: EndpointConfig) -> ExternalModelAgent:
    return ExternalModelAgent(config)


def make_agent(name, seed=0):
    """Agent factory for the CLI: oracle | random | noisy[:p] | external."""
    if name == "oracle":
        return OracleAgent()
    if name == "random":
        return RandomAgent(seed=seed)
    if name.startswith("noisy"):
        p = 0.3
        if ":" in name:
            p = float(name.split(":", 1)[1])
        return NoisyOracleAgent(p=p, seed=seed)
    if name == "external":
        url = os.environ.get("HOUSEWORLD_ENDPOINT_URL", "")
        if not url:
            raise EndpointUnavailable(
                "HOUSEWORLD_ENDPOINT_URL is not set")
        model = os.environ.get("HOUSEWORLD_ENDPOINT_MODEL", "")
        return ExternalModelAgent(EndpointConfig(url=url, model=model))
    raise HouseworldError(f"unknown agent {name!r}")


def evaluate_agent(pairs, agent, limits=None, seed=0):
    """Run the agent over (scene, task) pairs; returns (results, trajs).
    The agent's begin_episode hook is invoked before every episode."""
    results, trajs = [], []
    for i, (scene, task) in enumerate(pairs):
        key = derive_key_actions(task, scene)
        if hasattr(agent, "begin_episode"):
            agent.begin_episode(scene, task, key)
        result, traj = run_episode(
            scene, task, agent, limits=limits, key=key, seed=seed + i,
        )
        results.append(result)
        trajs.append(traj)
    return results, trajs
