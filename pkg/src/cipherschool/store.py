"""Durable state for the lesson service: one append-only JSONL file.

Every mutation appends a typed record; startup replays the file to rebuild
the in-memory views. Classroom scale (hundreds of students) never needs
more than this, and recovery after a crash or restart is just a re-read.

Terminal sessions are stored as their creation parameters plus every line
typed; because sessions are seeded, replaying the lines reproduces the
exact same artifacts and state machine position.
"""

from __future__ import annotations

import hashlib
import hmac
import json
import secrets
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path

from . import terminal
from .coach import Conversation
from .crypto import Credentials
from .lessons import LessonProgress
from .scenarios import ModuleId

_SCRYPT_N = 2**14
_SCRYPT_R = 8
_SCRYPT_P = 1


@dataclass
class StudentAccount:
    username: str
    display_name: str
    cohort: str
    salt: bytes
    password_hash: bytes

    @classmethod
    def create(cls, username: str, password: str, display_name: str = "", cohort: str = "") -> "StudentAccount":
        salt = secrets.token_bytes(16)
        return cls(
            username=username,
            display_name=display_name or username,
            cohort=cohort,
            salt=salt,
            password_hash=_kdf(password, salt),
        )

    def check_password(self, password: str) -> bool:
        return hmac.compare_digest(_kdf(password, self.salt), self.password_hash)


def _kdf(password: str, salt: bytes) -> bytes:
    return hashlib.scrypt(password.encode("utf-8"), salt=salt, n=_SCRYPT_N, r=_SCRYPT_R, p=_SCRYPT_P)


@dataclass
class SessionToken:
    token: str
    student_id: str
    expires_at: float

    @property
    def expired(self) -> bool:
        return time.time() >= self.expires_at


@dataclass
class StoredTrace:
    id: str
    student_id: str
    module: str
    records: dict


@dataclass
class TerminalState:
    """Creation parameters plus the full input history; the live session is
    rebuilt by replay."""

    student_id: str
    module: ModuleId
    seed: int
    message: str
    username: str
    password: str
    lines: list[str] = field(default_factory=list)
    session: terminal.TerminalSession | None = None

    def rebuild(self) -> terminal.TerminalSession:
        session = terminal.new_session(
            self.module,
            message=self.message,
            credentials=Credentials(self.username, self.password),
            seed=self.seed,
        )
        for line in self.lines:
            terminal.run_line(session, line)
        self.session = session
        return session


class Store:
    """Append-only JSONL store with in-memory views, safe for concurrent
    request handlers."""

    def __init__(self, data_dir: str | Path):
        self.data_dir = Path(data_dir)
        self.data_dir.mkdir(parents=True, exist_ok=True)
        self.path = self.data_dir / "store.jsonl"
        self._lock = threading.Lock()
        self.progress: dict[tuple[str, str], LessonProgress] = {}
        self.terminals: dict[tuple[str, str], TerminalState] = {}
        self.conversations: dict[tuple[str, str], Conversation] = {}
        self.traces: dict[str, StoredTrace] = {}
        self.attack_trace_ids: dict[tuple[str, str], str] = {}
        self.idempotency: dict[tuple[str, str, str], dict] = {}
        self._recover()

    # -- persistence machinery ------------------------------------------

    def _append(self, record_type: str, data: dict) -> None:
        line = json.dumps({"type": record_type, "data": data}, ensure_ascii=False)
        with self._lock:
            with self.path.open("a", encoding="utf-8") as fh:
                fh.write(line + "\n")
                fh.flush()

    def _recover(self) -> None:
        if not self.path.exists():
            return
        for line in self.path.read_text("utf-8").splitlines():
            if not line.strip():
                continue
            record = json.loads(line)
            self._apply(record["type"], record["data"], replay=True)

    def _apply(self, record_type: str, data: dict, replay: bool) -> None:
        if record_type == "progress":
            progress = LessonProgress.from_records(data)
            self.progress[(progress.student_id, progress.module.value)] = progress
        elif record_type == "terminal_session":
            state = TerminalState(
                student_id=data["student_id"],
                module=ModuleId(data["module"]),
                seed=int(data["seed"]),
                message=data["message"],
                username=data["username"],
                password=data["password"],
            )
            self.terminals[(state.student_id, state.module.value)] = state
        elif record_type == "terminal_line":
            state = self.terminals[(data["student_id"], data["module"])]
            state.lines.append(data["line"])
            if replay:
                state.session = None  # rebuilt lazily on first use
        elif record_type == "conversation":
            conv = Conversation.from_records(data["conversation"])
            self.conversations[(data["student_id"], conv.module.value)] = conv
        elif record_type == "trace":
            stored = StoredTrace(
                id=data["id"], student_id=data["student_id"], module=data["module"], records=data["records"]
            )
            self.traces[stored.id] = stored
            if data.get("attack_source"):
                self.attack_trace_ids[(stored.student_id, stored.module)] = stored.id
        elif record_type == "idempotency":
            self.idempotency[(data["scope"], data["endpoint"], data["key"])] = data["response"]
        else:  # pragma: no cover - future record types are skipped, not fatal
            pass

    # -- typed mutators --------------------------------------------------

    def save_progress(self, progress: LessonProgress) -> None:
        data = progress.to_records()
        self._apply("progress", data, replay=False)
        self._append("progress", data)

    def get_progress(self, student_id: str, module: ModuleId) -> LessonProgress:
        key = (student_id, module.value)
        if key not in self.progress:
            self.progress[key] = LessonProgress(student_id=student_id, module=module)
        return self.progress[key]

    def create_terminal(self, state: TerminalState) -> None:
        data = {
            "student_id": state.student_id,
            "module": state.module.value,
            "seed": state.seed,
            "message": state.message,
            "username": state.username,
            "password": state.password,
        }
        self._apply("terminal_session", data, replay=False)
        self._append("terminal_session", data)

    def record_terminal_line(self, student_id: str, module: ModuleId, line: str) -> None:
        self.terminals[(student_id, module.value)].lines.append(line)
        self._append(
            "terminal_line", {"student_id": student_id, "module": module.value, "line": line}
        )

    def save_conversation(self, student_id: str, conversation: Conversation) -> None:
        data = {"student_id": student_id, "conversation": conversation.to_records()}
        self._apply("conversation", data, replay=False)
        self._append("conversation", data)

    def save_trace(self, stored: StoredTrace, attack_source: bool = False) -> None:
        data = {
            "id": stored.id,
            "student_id": stored.student_id,
            "module": stored.module,
            "records": stored.records,
            "attack_source": attack_source,
        }
        self._apply("trace", data, replay=False)
        self._append("trace", data)

    def save_idempotency(self, scope: str, endpoint: str, key: str, response: dict) -> None:
        data = {"scope": scope, "endpoint": endpoint, "key": key, "response": response}
        self._apply("idempotency", data, replay=False)
        self._append("idempotency", data)

    def get_idempotency(self, scope: str, endpoint: str, key: str) -> dict | None:
        return self.idempotency.get((scope, endpoint, key))
