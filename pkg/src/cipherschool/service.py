"""The lesson service: session-scoped HTTP API over the whole platform.

Students log in with pre-created credentials; every other endpoint is
token-scoped and a student can only ever touch their own state. Stage
order is enforced server-side: the quiz will not open before the terminal
work is done, and so on, mirroring the lesson cycle.

Mutating endpoints honor an ``Idempotency-Key`` header so a retried
request (flaky classroom wifi) cannot double-apply.
"""

from __future__ import annotations

import hashlib
import json
import secrets
import threading
import time
from collections import defaultdict
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

import yaml
from fastapi import Depends, FastAPI, Header, Request
from fastapi.responses import JSONResponse, StreamingResponse
from pydantic import BaseModel

from . import coach as coach_mod
from . import terminal as terminal_mod
from .channel import EventTrace
from .crypto import Credentials
from .lessons import (
    ContentPack,
    OutOfOrderStage,
    Stage,
    advance,
    load_content_pack,
    score_quiz,
    validate_content_pack,
)
from .scenarios import (
    Classification,
    InputMismatch,
    ModuleId,
    ScenarioSpec,
    run_experience,
    run_option,
)
from .store import SessionToken, Store, StoredTrace, StudentAccount, TerminalState

DEFAULT_TOKEN_TTL_S = 24 * 3600

SECURE_OPTION = {ModuleId.HASHING: 3, ModuleId.SYMMETRIC: 2, ModuleId.ASYMMETRIC: 3}


class ApiError(Exception):
    def __init__(self, code: str, message: str, status: int = 400):
        super().__init__(message)
        self.code = code
        self.message = message
        self.status = status


class SeedDataError(Exception):
    """Startup refusal: bad accounts file or content pack."""

    def __init__(self, problems: list[str]):
        self.problems = problems
        super().__init__("; ".join(problems))


@dataclass
class Settings:
    data_dir: str | Path
    content_path: str | Path | None = None
    accounts_path: str | Path | None = None
    seed: int | None = None
    token_ttl_s: float = DEFAULT_TOKEN_TTL_S
    provider: coach_mod.ChatProvider | None = None
    use_env_provider: bool = True


def load_accounts(path: str | Path) -> list[dict]:
    raw = yaml.safe_load(Path(path).read_text("utf-8"))
    if not isinstance(raw, list):
        raise SeedDataError(["accounts file must be a list of {username, password, ...} entries"])
    problems = []
    seen: set[str] = set()
    for entry in raw:
        username = str(entry.get("username", "")).strip()
        if not username or not str(entry.get("password", "")):
            problems.append(f"account entry {entry!r} needs username and password")
        elif username in seen:
            problems.append(f"duplicate username: {username}")
        seen.add(username)
    if problems:
        raise SeedDataError(problems)
    return raw


def _derived_seed(*parts: object) -> int:
    digest = hashlib.sha256("|".join(str(p) for p in parts).encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big")


class ServiceState:
    def __init__(self, settings: Settings):
        self.settings = settings
        self.pack: ContentPack = load_content_pack(settings.content_path)
        violations = validate_content_pack(self.pack)
        if violations:
            raise SeedDataError([f"{v.location}: {v.message}" for v in violations])
        self.accounts: dict[str, StudentAccount] = {}
        if settings.accounts_path:
            for entry in load_accounts(settings.accounts_path):
                account = StudentAccount.create(
                    username=str(entry["username"]),
                    password=str(entry["password"]),
                    display_name=str(entry.get("display_name", "")),
                    cohort=str(entry.get("cohort", "")),
                )
                self.accounts[account.username] = account
        self.store = Store(settings.data_dir)
        self.tokens: dict[str, SessionToken] = {}
        self.session_locks: dict[tuple[str, str], threading.Lock] = defaultdict(threading.Lock)
        self._dummy = StudentAccount.create("nobody", "nobody")
        if settings.provider is not None:
            self.provider: coach_mod.ChatProvider | None = settings.provider
        elif settings.use_env_provider:
            self.provider = coach_mod.provider_from_env()
        else:
            self.provider = None

    # -- auth ------------------------------------------------------------

    def login(self, username: str, password: str) -> SessionToken:
        account = self.accounts.get(username)
        if account is None:
            self._dummy.check_password(password)  # burn the same time either way
            raise ApiError("AuthFailed", "invalid username or password", 401)
        if not account.check_password(password):
            raise ApiError("AuthFailed", "invalid username or password", 401)
        token = SessionToken(
            token=secrets.token_urlsafe(32),
            student_id=username,
            expires_at=time.time() + self.settings.token_ttl_s,
        )
        self.tokens[token.token] = token
        return token

    def authenticate(self, header: str | None) -> str:
        if not header or not header.startswith("Bearer "):
            raise ApiError("AuthRequired", "missing bearer token", 401)
        token = self.tokens.get(header.removeprefix("Bearer "))
        if token is None or token.expired:
            raise ApiError("AuthFailed", "invalid or expired token", 401)
        return token.student_id

    # -- lesson plumbing ---------------------------------------------------

    def parse_module(self, value: str) -> ModuleId:
        try:
            return ModuleId(value)
        except ValueError:
            raise ApiError("UnknownModule", f"no module named {value!r}", 404)

    def parse_input(self, module: ModuleId, raw: object) -> str | Credentials:
        content = self.pack.modules[module]
        if module is ModuleId.ASYMMETRIC:
            if raw is None:
                return content.default_credentials
            if isinstance(raw, dict) and raw.get("username") and raw.get("password"):
                return Credentials(str(raw["username"]), str(raw["password"]))
            raise ApiError("InputMismatch", "the login module needs {username, password}", 400)
        if raw is None:
            return content.default_message
        if not isinstance(raw, str) or not raw:
            raise ApiError("InputMismatch", f"the {module.value} module needs a text message", 400)
        return raw

    def run_seed(self, student_id: str, module: ModuleId) -> int | None:
        if self.settings.seed is None:
            return None
        return _derived_seed(self.settings.seed, "run", student_id, module.value)

    def terminal_seed(self, student_id: str, module: ModuleId) -> int:
        if self.settings.seed is None:
            return secrets.randbits(63)
        return _derived_seed(self.settings.seed, "terminal", student_id, module.value)

    def store_trace(self, student_id: str, module: ModuleId, trace: EventTrace, attack_source: bool = False) -> str:
        trace_id = secrets.token_hex(8)
        self.store.save_trace(
            StoredTrace(
                id=trace_id, student_id=student_id, module=module.value, records=trace.to_records()
            ),
            attack_source=attack_source,
        )
        return trace_id

    def require_stages(self, student_id: str, module: ModuleId, *needed: Stage) -> None:
        progress = self.store.get_progress(student_id, module)
        for stage in needed:
            if not progress.stage_done(stage):
                raise ApiError(
                    "OutOfOrderStage",
                    f"finish the {stage.value} stage of {module.value} first",
                    409,
                )

    def complete_stage(self, student_id: str, module: ModuleId, stage: Stage) -> None:
        progress = self.store.get_progress(student_id, module)
        if progress.stage_done(stage):
            return
        try:
            advance(progress, stage)
        except OutOfOrderStage as exc:
            raise ApiError("OutOfOrderStage", str(exc), 409)
        self.store.save_progress(progress)


# ---------------------------------------------------------------------------
# Request bodies
# ---------------------------------------------------------------------------

class LoginBody(BaseModel):
    username: str
    password: str


class ExperienceBody(BaseModel):
    module: str
    attacked: bool = False
    input: str | dict | None = None


class ScenarioBody(BaseModel):
    module: str
    option: int
    input: str | dict | None = None


class TerminalBody(BaseModel):
    session_id: str
    line: str


class CoachStartBody(BaseModel):
    module: str


class CoachReplyBody(BaseModel):
    session_id: str
    text: str


class QuizBody(BaseModel):
    module: str
    answers: list[int]


# ---------------------------------------------------------------------------
# App factory
# ---------------------------------------------------------------------------

def create_app(settings: Settings) -> FastAPI:
    state = ServiceState(settings)
    app = FastAPI(title="cipherschool", version="0.1.0")
    app.state.service = state

    @app.exception_handler(ApiError)
    async def _api_error(_request: Request, exc: ApiError) -> JSONResponse:
        return JSONResponse(status_code=exc.status, content={"code": exc.code, "message": exc.message})

    def current_student(authorization: str | None = Header(default=None)) -> str:
        return state.authenticate(authorization)

    def idempotent(
        scope: str, endpoint: str, key: str | None, compute: Callable[[], dict]
    ) -> dict:
        if key:
            cached = state.store.get_idempotency(scope, endpoint, key)
            if cached is not None:
                return cached
        response = compute()
        if key:
            state.store.save_idempotency(scope, endpoint, key, response)
        return response

    @app.get("/healthz")
    def healthz() -> dict:
        return {"status": "ok", "version": app.version}

    @app.post("/login")
    def login(
        body: LoginBody, idempotency_key: str | None = Header(default=None, alias="Idempotency-Key")
    ) -> dict:
        def compute() -> dict:
            token = state.login(body.username, body.password)
            account = state.accounts[token.student_id]
            return {
                "token": token.token,
                "student_id": token.student_id,
                "display_name": account.display_name,
            }

        return idempotent(body.username, "login", idempotency_key, compute)

    @app.get("/modules")
    def modules(student_id: str = Depends(current_student)) -> dict:
        del student_id
        out = []
        for module_id, content in state.pack.modules.items():
            out.append(
                {
                    "id": module_id.value,
                    "title": content.title,
                    "story": content.story,
                    "video": {"url": content.video.url, "title": content.video.title},
                    "concept_video": {
                        "url": content.concept_video.url,
                        "title": content.concept_video.title,
                    },
                    "default_message": content.default_message,
                    "stages": [s.value for s in Stage],
                    "secure_option": SECURE_OPTION[module_id],
                    "scenarios": [
                        {"option": n.option, "label": n.label, "story": n.story}
                        for _, n in sorted(content.scenarios.items())
                    ],
                    "quiz": [
                        {
                            "id": q.id,
                            "text": q.text,
                            "choices": list(q.choices),
                            "category": q.category.value,
                        }
                        for q in content.quiz
                    ],
                }
            )
        return {"modules": out}

    @app.post("/experience/run")
    def experience_run(
        body: ExperienceBody,
        student_id: str = Depends(current_student),
        idempotency_key: str | None = Header(default=None, alias="Idempotency-Key"),
    ) -> dict:
        module = state.parse_module(body.module)

        def compute() -> dict:
            content = state.pack.modules[module]
            student_input = state.parse_input(module, body.input)
            try:
                trace = run_experience(
                    module,
                    body.attacked,
                    student_input,
                    seed=state.run_seed(student_id, module),
                    attacker_text=content.attacker_message or None,
                )
            except InputMismatch as exc:
                raise ApiError("InputMismatch", str(exc), 400)
            trace_id = state.store_trace(student_id, module, trace, attack_source=body.attacked)
            if body.attacked:
                progress = state.store.get_progress(student_id, module)
                if not progress.stage_done(Stage.EXPERIENCE):
                    state.complete_stage(student_id, module, Stage.EXPERIENCE)
            return {"trace_id": trace_id, "trace": trace.to_records()}

        return idempotent(student_id, "experience/run", idempotency_key, compute)

    @app.post("/scenario/run")
    def scenario_run(
        body: ScenarioBody,
        student_id: str = Depends(current_student),
        idempotency_key: str | None = Header(default=None, alias="Idempotency-Key"),
    ) -> dict:
        module = state.parse_module(body.module)
        if body.option not in (1, 2, 3):
            raise ApiError("UnknownOption", "option must be 1, 2, or 3", 400)
        state.require_stages(student_id, module, Stage.EXPERIENCE, Stage.REFLECTION)

        def compute() -> dict:
            content = state.pack.modules[module]
            student_input = state.parse_input(module, body.input)
            try:
                trace, verdict = run_option(
                    ScenarioSpec(module, body.option),
                    student_input,
                    seed=state.run_seed(student_id, module),
                    attacker_text=content.attacker_message or None,
                )
            except InputMismatch as exc:
                raise ApiError("InputMismatch", str(exc), 400)
            trace_id = state.store_trace(student_id, module, trace)
            if body.option == SECURE_OPTION[module]:
                progress = state.store.get_progress(student_id, module)
                if not progress.stage_done(Stage.CONCEPTUALIZATION):
                    state.complete_stage(student_id, module, Stage.CONCEPTUALIZATION)
            return {
                "trace_id": trace_id,
                "trace": trace.to_records(),
                "verdict": {
                    "classification": verdict.classification.value,
                    "reason": verdict.reason,
                },
            }

        return idempotent(student_id, "scenario/run", idempotency_key, compute)

    @app.post("/terminal/exec")
    def terminal_exec(
        body: TerminalBody,
        student_id: str = Depends(current_student),
        idempotency_key: str | None = Header(default=None, alias="Idempotency-Key"),
    ) -> dict:
        module = state.parse_module(body.session_id)
        state.require_stages(
            student_id, module, Stage.EXPERIENCE, Stage.REFLECTION, Stage.CONCEPTUALIZATION
        )

        def compute() -> dict:
            with state.session_locks[(student_id, module.value)]:
                key = (student_id, module.value)
                terminal_state = state.store.terminals.get(key)
                if terminal_state is None:
                    content = state.pack.modules[module]
                    terminal_state = TerminalState(
                        student_id=student_id,
                        module=module,
                        seed=state.terminal_seed(student_id, module),
                        message=content.default_message or "hello",
                        username=content.default_credentials.username,
                        password=content.default_credentials.password,
                    )
                    state.store.create_terminal(terminal_state)
                session = terminal_state.session or terminal_state.rebuild()
                feedback = terminal_mod.run_line(session, body.line)
                state.store.record_terminal_line(student_id, module, body.line)
                response: dict = {"status": feedback.status.value, "text": feedback.text}
                if feedback.trace is not None:
                    response["trace_id"] = state.store_trace(student_id, module, feedback.trace)
                    response["trace"] = feedback.trace.to_records()
                if session.done:
                    progress = state.store.get_progress(student_id, module)
                    if not progress.stage_done(Stage.EXPERIMENTATION):
                        state.complete_stage(student_id, module, Stage.EXPERIMENTATION)
                return response

        return idempotent(student_id, "terminal/exec", idempotency_key, compute)

    @app.get("/terminal/{module}/transcript")
    def terminal_transcript(module: str, student_id: str = Depends(current_student)) -> dict:
        module_id = state.parse_module(module)
        terminal_state = state.store.terminals.get((student_id, module_id.value))
        if terminal_state is None:
            return {"entries": []}
        session = terminal_state.session or terminal_state.rebuild()
        return {
            "entries": [
                {"line": line, "status": fb.status.value, "text": fb.text}
                for line, fb in session.transcript
            ]
        }

    @app.post("/coach/start")
    def coach_start(
        body: CoachStartBody,
        student_id: str = Depends(current_student),
        idempotency_key: str | None = Header(default=None, alias="Idempotency-Key"),
    ) -> dict:
        module = state.parse_module(body.module)
        state.require_stages(student_id, module, Stage.EXPERIENCE)

        def compute() -> dict:
            with state.session_locks[(student_id, f"coach-{module.value}")]:
                existing = state.store.conversations.get((student_id, module.value))
                if existing is not None:
                    return {
                        "conversation_id": existing.id,
                        "coach_text": existing.turns[0].text,
                        "source": existing.source.value,
                    }
                trace_id = state.store.attack_trace_ids.get((student_id, module.value))
                if trace_id is None:
                    raise ApiError("NoAttackTrace", "run the attacked experience first", 409)
                trace = EventTrace.from_records(state.store.traces[trace_id].records)
                profile = state.pack.modules[module].coach
                conversation = coach_mod.start_reflection(module, trace, profile)
                state.store.save_conversation(student_id, conversation)
                return {
                    "conversation_id": conversation.id,
                    "coach_text": conversation.turns[0].text,
                    "source": conversation.source.value,
                }

        return idempotent(student_id, "coach/start", idempotency_key, compute)

    @app.post("/coach/reply")
    def coach_reply(
        body: CoachReplyBody,
        student_id: str = Depends(current_student),
        idempotency_key: str | None = Header(default=None, alias="Idempotency-Key"),
    ) -> dict:
        module = state.parse_module(body.session_id)

        def compute() -> dict:
            with state.session_locks[(student_id, f"coach-{module.value}")]:
                conversation = state.store.conversations.get((student_id, module.value))
                if conversation is None:
                    raise ApiError("NoConversation", "start the reflection first", 409)
                profile = state.pack.modules[module].coach
                try:
                    coach_mod.reply(conversation, body.text, profile, provider=state.provider)
                except ValueError as exc:
                    raise ApiError("ConversationClosed", str(exc), 409)
                state.store.save_conversation(student_id, conversation)
                progress = state.store.get_progress(student_id, module)
                if not progress.stage_done(Stage.REFLECTION):
                    state.complete_stage(student_id, module, Stage.REFLECTION)
                return {
                    "coach_text": conversation.turns[-1].text,
                    "source": conversation.source.value,
                    "closed": conversation.closed,
                }

        return idempotent(student_id, "coach/reply", idempotency_key, compute)

    @app.post("/quiz/submit")
    def quiz_submit(
        body: QuizBody,
        student_id: str = Depends(current_student),
        idempotency_key: str | None = Header(default=None, alias="Idempotency-Key"),
    ) -> dict:
        module = state.parse_module(body.module)

        def compute() -> dict:
            progress = state.store.get_progress(student_id, module)
            if not progress.stage_done(Stage.QUIZ):
                # advance() enforces that every earlier stage is complete
                state.complete_stage(student_id, module, Stage.QUIZ)
                progress = state.store.get_progress(student_id, module)
            try:
                result = score_quiz(body.answers, state.pack.modules[module].quiz)
            except Exception as exc:
                raise ApiError("InvalidSubmission", str(exc), 400)
            progress.quiz_result = result
            state.store.save_progress(progress)
            return result.to_records()

        return idempotent(student_id, "quiz/submit", idempotency_key, compute)

    @app.get("/progress")
    def progress(student_id: str = Depends(current_student)) -> dict:
        out = {}
        for module in ModuleId:
            record = state.store.get_progress(student_id, module)
            out[module.value] = {
                "completed_stages": [s.value for s in record.completed_stages],
                "next_stage": record.next_stage.value if record.next_stage else None,
                "quiz_result": record.quiz_result.to_records() if record.quiz_result else None,
            }
        return {"modules": out}

    def _owned_trace(trace_id: str, student_id: str) -> StoredTrace:
        stored = state.store.traces.get(trace_id)
        if stored is None or stored.student_id != student_id:
            raise ApiError("NotFound", "no such trace", 404)
        return stored

    @app.get("/trace/{trace_id}")
    def get_trace(trace_id: str, student_id: str = Depends(current_student)) -> dict:
        stored = _owned_trace(trace_id, student_id)
        return {"trace_id": stored.id, "module": stored.module, "trace": stored.records}

    @app.get("/trace/{trace_id}/stream")
    def stream_trace(trace_id: str, student_id: str = Depends(current_student)) -> StreamingResponse:
        stored = _owned_trace(trace_id, student_id)

        def generate():
            for event in stored.records["events"]:
                yield f"id: {event['seq']}\ndata: {json.dumps(event, ensure_ascii=False)}\n\n"
            outcome = json.dumps({"outcome": stored.records["outcome"]})
            yield f"event: outcome\ndata: {outcome}\n\n"

        return StreamingResponse(generate(), media_type="text/event-stream")

    return app
