"""Line-delimited JSON evaluation service over TCP.

One connection hosts one session, one session runs one episode. The
client opens with ``session_init{task_id, seed, version}``; the server
streams ``turn`` (and ``feedback``) messages, the client answers each
with ``decision{text}``, and the episode closes with
``episode_end{result}``. A ``report`` request on a fresh connection
returns the aggregate metrics of all finished episodes. Sessions are
fully isolated; a malformed message errors only its own session.
"""

import json
import logging
import socketserver
import threading
from dataclasses import dataclass

from .errors import HouseworldError
from .harness import EpisodeSession, Limits
from .metrics import aggregate
from .planner import derive_key_actions

log = logging.getLogger(__name__)

PROTOCOL_VERSION = "1"


def _msg(kind, **fields):
    fields["kind"] = kind
    return fields


@dataclass
class ServerConfig:
    host: str = "127.0.0.1"
    port: int = 0  # 0 = ephemeral
    limits: Limits = None


class _Handler(socketserver.StreamRequestHandler):
    def _send(self, message):
        data = json.dumps(message, sort_keys=True) + "\n"
        self.wfile.write(data.encode("utf-8"))
        self.wfile.flush()

    def _recv(self):
        line = self.rfile.readline()
        if not line:
            return None
        try:
            msg = json.loads(line.decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise HouseworldError(f"malformed message: {exc}")
        if not isinstance(msg, dict) or "kind" not in msg:
            raise HouseworldError("message must be an object with a kind")
        return msg

    def handle(self):
        hub = self.server.hub
        session = None
        try:
            first = self._recv()
            if first is None:
                return
            if first["kind"] == "report":
                self._send(_msg("report",
                                result=aggregate(hub.results()).to_dict()))
                return
            if first["kind"] != "session_init":
                self._send(_msg("error",
                                text=f"expected session_init, "
                                     f"got {first['kind']}"))
                return
            version = str(first.get("version", PROTOCOL_VERSION))
            if version != PROTOCOL_VERSION:
                self._send(_msg("error",
                                text=f"protocol version {version} "
                                     f"unsupported"))
                return
            task_id = first.get("task_id")
            seed = int(first.get("seed", 0))
            try:
                scene, task, key = hub.lookup(task_id)
            except KeyError:
                self._send(_msg("error", text=f"unknown task {task_id!r}"))
                return
            session = EpisodeSession(
                scene, task, key=key, limits=hub.limits, seed=seed,
            )
            session_id = hub.register()
            self._send(_msg("ack", version=PROTOCOL_VERSION,
                            session_id=session_id, task_id=task_id))
            for turn in session.turns:
                self._send(_msg("turn", role=turn.role, text=turn.text))
            while not session.done:
                msg = self._recv()
                if msg is None:  # disconnect mid-episode
                    session.abort()
                    break
                if msg["kind"] != "decision":
                    self._send(_msg("error",
                                    text=f"expected decision, "
                                         f"got {msg['kind']}"))
                    continue
                new_turns = session.submit(str(msg.get("text", "")))
                for turn in new_turns:
                    kind = ("feedback"
                            if turn.text and turn.text.startswith("<|feedback|>")
                            else "turn")
                    if kind == "feedback":
                        self._send(_msg("feedback", text=turn.text))
                    else:
                        self._send(_msg("turn", role=turn.role,
                                        text=turn.text))
            result, traj = session.finish()
            hub.record(result, traj)
            self._send(_msg("episode_end", result={
                "task_id": result.task_id,
                "success": result.success,
                "ended": result.ended,
                "n_predicted": len(result.predicted_actions),
                "key_length": result.key_length,
                "search_efficiency": result.search_efficiency,
                "task_completeness": result.task_completeness,
                "rer": result.rer,
                "reasons": result.reasons,
            }))
        except (BrokenPipeError, ConnectionResetError):
            if session is not None and not session.done:
                session.abort()
                result, traj = session.finish()
                hub.record(result, traj)
        except HouseworldError as exc:
            try:
                self._send(_msg("error", text=str(exc)))
            except OSError:
                pass
        except Exception:
            log.exception("session crashed")
            try:
                self._send(_msg("error", text="internal session error"))
            except OSError:
                pass


class _Server(socketserver.ThreadingTCPServer):
    allow_reuse_address = True
    daemon_threads = True


class EvaluationHub:
    """Task registry plus a thread-safe append-only result log."""

    def __init__(self, pairs, limits=None):
        # pairs: iterable of (scene, task)
        self._by_task = {}
        for scene, task in pairs:
            key = derive_key_actions(task, scene)
            self._by_task[task.id] = (scene, task, key)
        self.limits = limits or Limits()
        self._lock = threading.Lock()
        self._results = []
        self._trajectories = []
        self._counter = 0

    def lookup(self, task_id):
        return self._by_task[task_id]

    def task_ids(self):
        return sorted(self._by_task)

    def register(self):
        with self._lock:
            self._counter += 1
            return self._counter

    def record(self, result, traj):
        with self._lock:
            self._results.append(result)
            self._trajectories.append(traj)

    def results(self):
        with self._lock:
            return list(self._results)

    def trajectories(self):
        with self._lock:
            return list(self._trajectories)


def serve(pairs, config=None):
    """Start the service in a background thread; returns
    (server, hub, (host, port)). Call server.shutdown() to stop."""
    config = config or ServerConfig()
    hub = EvaluationHub(pairs, limits=config.limits)
    server = _Server((config.host, config.port), _Handler)
    server.hub = hub
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    return server, hub, server.server_address


def serve_forever(pairs, config=None):
    """Blocking variant for the CLI."""
    config = config or ServerConfig()
    hub = EvaluationHub(pairs, limits=config.limits)
    server = _Server((config.host, config.port), _Handler)
    server.hub = hub
    host, port = server.server_address
    log.info("serving %d tasks on %s:%d", len(hub.task_ids()), host, port)
    print(f"listening on {host}:{port}", flush=True)
    try:
        server.serve_forever()
    finally:
        server.server_close()
