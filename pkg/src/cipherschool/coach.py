"""The reflection coach: one conversational profile per module, backed by a
pluggable chat-completion provider with a deterministic scripted fallback.

The fallback is a keyword-routed dialog script, so the whole reflection
stage works offline and replays identically in tests. When a live provider
is configured, its replies are trimmed to the sentence cap and always end
on a question until the designated closing turn.
"""

from __future__ import annotations

import hashlib
import json
import os
import re
import time
import uuid
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Callable, Protocol

import httpx

from .channel import EventKind, EventTrace
from .scenarios import ModuleId

ENV_ENDPOINT = "CIPHERSCHOOL_COACH_ENDPOINT"
ENV_MODEL = "CIPHERSCHOOL_COACH_MODEL"
ENV_API_KEY = "CIPHERSCHOOL_COACH_API_KEY"
ENV_FIXTURES = "CIPHERSCHOOL_COACH_FIXTURES"
DEFAULT_TIMEOUT_S = 10.0
DEFAULT_SENTENCE_CAP = 4

_SENTENCES = re.compile(r"[^.!?]*[.!?]+|[^.!?]+$")


class ProviderError(Exception):
    """Any live-provider failure; callers fall back to the script."""


class ProviderTimeout(ProviderError):
    pass


class Speaker(str, Enum):
    COACH = "Coach"
    STUDENT = "Student"


class Source(str, Enum):
    LIVE_PROVIDER = "LiveProvider"
    FALLBACK = "Fallback"


@dataclass(frozen=True)
class FallbackBranch:
    patterns: tuple[str, ...]
    text: str


@dataclass(frozen=True)
class FallbackStep:
    """One exchange: keyword branches first, the default text otherwise."""

    default: str
    branches: tuple[FallbackBranch, ...] = ()

    def pick(self, student_text: str) -> str:
        lowered = student_text.lower()
        for branch in self.branches:
            if any(pattern.lower() in lowered for pattern in branch.patterns):
                return branch.text
        return self.default


@dataclass(frozen=True)
class FallbackScript:
    module: ModuleId
    steps: tuple[FallbackStep, ...]
    reprompt: str
    closing: str


@dataclass(frozen=True)
class CoachProfile:
    module: ModuleId
    system_prompt: str
    opening_question: str  # template: {detail} and {preview} from the trace
    nudge: str  # appended when a live reply forgets to ask anything
    fallback: FallbackScript
    max_reply_sentences: int = DEFAULT_SENTENCE_CAP


@dataclass(frozen=True)
class Turn:
    speaker: Speaker
    text: str
    at: float


@dataclass
class Conversation:
    id: str
    module: ModuleId
    turns: list[Turn] = field(default_factory=list)
    source: Source = Source.FALLBACK
    exchanges: int = 0
    closed: bool = False

    def to_records(self) -> dict:
        return {
            "id": self.id,
            "module": self.module.value,
            "turns": [{"speaker": t.speaker.value, "text": t.text, "at": t.at} for t in self.turns],
            "source": self.source.value,
            "exchanges": self.exchanges,
            "closed": self.closed,
        }

    @classmethod
    def from_records(cls, records: dict) -> "Conversation":
        conv = cls(id=records["id"], module=ModuleId(records["module"]))
        conv.turns = [
            Turn(Speaker(t["speaker"]), t["text"], float(t["at"])) for t in records["turns"]
        ]
        conv.source = Source(records["source"])
        conv.exchanges = int(records["exchanges"])
        conv.closed = bool(records["closed"])
        return conv


# ---------------------------------------------------------------------------
# Providers
# ---------------------------------------------------------------------------

class ChatProvider(Protocol):
    def complete(self, system_prompt: str, messages: list[dict]) -> str:
        """Return the assistant reply for the given chat history."""
        ...  # pragma: no cover


def _request_key(system_prompt: str, messages: list[dict]) -> str:
    payload = json.dumps({"system": system_prompt, "messages": messages}, sort_keys=True)
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()[:16]


class HttpChatProvider:
    """Generic chat-completion client; endpoint, model, and credential are
    configuration, never code."""

    def __init__(self, endpoint: str, model: str, api_key: str, timeout: float = DEFAULT_TIMEOUT_S):
        self.endpoint = endpoint
        self.model = model
        self._api_key = api_key
        self.timeout = timeout

    def complete(self, system_prompt: str, messages: list[dict]) -> str:
        body = {"model": self.model, "messages": [{"role": "system", "content": system_prompt}] + messages}
        try:
            response = httpx.post(
                self.endpoint,
                json=body,
                headers={"Authorization": f"Bearer {self._api_key}"},
                timeout=self.timeout,
            )
            response.raise_for_status()
            return str(response.json()["choices"][0]["message"]["content"])
        except httpx.TimeoutException as exc:
            raise ProviderTimeout(f"provider timed out after {self.timeout}s") from exc
        except Exception as exc:
            raise ProviderError(f"provider request failed: {type(exc).__name__}") from exc


class ReplayProvider:
    """Serves recorded exchanges from a fixture directory; any miss is a
    provider error, which routes the caller to the fallback script."""

    def __init__(self, directory: str | Path):
        self.directory = Path(directory)

    def complete(self, system_prompt: str, messages: list[dict]) -> str:
        path = self.directory / f"{_request_key(system_prompt, messages)}.json"
        if not path.exists():
            raise ProviderError(f"no recorded exchange at {path.name}")
        return str(json.loads(path.read_text())["response"])


class RecordingProvider:
    """Wraps a live provider and writes each exchange as a replay fixture."""

    def __init__(self, inner: ChatProvider, directory: str | Path):
        self.inner = inner
        self.directory = Path(directory)

    def complete(self, system_prompt: str, messages: list[dict]) -> str:
        response = self.inner.complete(system_prompt, messages)
        self.directory.mkdir(parents=True, exist_ok=True)
        path = self.directory / f"{_request_key(system_prompt, messages)}.json"
        path.write_text(json.dumps({"response": response}, ensure_ascii=False, indent=2))
        return response


def provider_from_env(environ: dict[str, str] | None = None) -> ChatProvider | None:
    """Build the configured provider, or None when unconfigured.

    A fixtures directory wins over a live endpoint so tests and offline
    demos never touch the network.
    """
    env = environ if environ is not None else dict(os.environ)
    if env.get(ENV_FIXTURES):
        return ReplayProvider(env[ENV_FIXTURES])
    endpoint, key = env.get(ENV_ENDPOINT), env.get(ENV_API_KEY)
    if endpoint and key:
        return HttpChatProvider(endpoint, env.get(ENV_MODEL, "default"), key)
    return None


# ---------------------------------------------------------------------------
# Conversation flow
# ---------------------------------------------------------------------------

def split_sentences(text: str) -> list[str]:
    return [m.group(0).strip() for m in _SENTENCES.finditer(text) if m.group(0).strip()]


def trim_reply(text: str, cap: int, nudge: str) -> str:
    """Cap the sentence count and make sure the reply still asks something."""
    sentences = split_sentences(text)[:cap]
    if not sentences:
        return nudge
    if not sentences[-1].endswith("?"):
        if len(sentences) == cap:
            sentences = sentences[:-1]
        sentences.append(nudge)
    return " ".join(sentences)


def _attack_evidence(trace: EventTrace) -> tuple[str, str]:
    event = trace.first(EventKind.MODIFIED) or trace.first(EventKind.KEY_STOLEN)
    if event is None:
        raise ValueError("reflection needs an attacked-experience trace")
    recovered = trace.first(EventKind.DECRYPTED_BY_ATTACKER)
    preview = recovered.payload_preview if recovered is not None else event.payload_preview
    return event.detail, preview


def start_reflection(
    module: ModuleId,
    trace: EventTrace,
    profile: CoachProfile,
    conversation_id: str | None = None,
    clock: Callable[[], float] = time.time,
) -> Conversation:
    """Open a conversation with a question about the observed attack."""
    if profile.module is not module:
        raise ValueError("profile and module do not match")
    detail, preview = _attack_evidence(trace)
    opening = profile.opening_question.format(detail=detail, preview=preview)
    conv = Conversation(id=conversation_id or uuid.uuid4().hex, module=module)
    conv.turns.append(Turn(Speaker.COACH, opening, clock()))
    return conv


def provider_request(profile: CoachProfile, conversation: Conversation, provider: ChatProvider) -> str:
    """One live completion over the conversation so far, trimmed to the cap."""
    messages = [
        {"role": "assistant" if t.speaker is Speaker.COACH else "user", "content": t.text}
        for t in conversation.turns
    ]
    raw = provider.complete(profile.system_prompt, messages)
    return trim_reply(raw, profile.max_reply_sentences, profile.nudge)


def reply(
    conversation: Conversation,
    student_text: str,
    profile: CoachProfile,
    provider: ChatProvider | None = None,
    clock: Callable[[], float] = time.time,
) -> Conversation:
    """Append the student turn and the coach's answer to it.

    The coach answer comes from the live provider when one is configured
    and healthy; any provider trouble switches the conversation to the
    fallback script, recorded in ``source``.
    """
    if conversation.closed:
        raise ValueError("this reflection is already closed")
    if not conversation.turns or conversation.turns[-1].speaker is not Speaker.COACH:
        raise ValueError("it is the student's turn to speak")
    conversation.turns.append(Turn(Speaker.STUDENT, student_text, clock()))
    script = profile.fallback
    if not student_text.strip():
        conversation.turns.append(Turn(Speaker.COACH, script.reprompt, clock()))
        return conversation
    coach_text: str | None = None
    if provider is not None:
        try:
            coach_text = provider_request(profile, conversation, provider)
            conversation.source = Source.LIVE_PROVIDER
        except ProviderError:
            coach_text = None
    if coach_text is None:
        conversation.source = Source.FALLBACK
        if conversation.exchanges < len(script.steps):
            coach_text = script.steps[conversation.exchanges].pick(student_text)
        else:
            coach_text = script.closing
            conversation.closed = True
    conversation.exchanges += 1
    conversation.turns.append(Turn(Speaker.COACH, coach_text, clock()))
    return conversation
