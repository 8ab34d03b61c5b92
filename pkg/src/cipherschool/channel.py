"""The simulated wire between two parties, with an attacker in the middle.

The attacker is a fixed transformation, not an adaptive agent: the same
inputs always produce the same trace, which is what makes runs gradable
and replayable. Every transmission yields an ordered event trace that the
UI plays back as an animation.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum

from . import crypto

PREVIEW_CHARS = 48
ELLIPSIS = "…"


class ChannelError(Exception):
    pass


class IllegalBehavior(ChannelError):
    """The attacker behavior does not apply to this kind of message."""


class IllegalParty(ChannelError):
    """The attacker cannot be a legitimate endpoint."""


class InternalInconsistency(ChannelError):
    """A stolen key that cannot decrypt the follow-up ciphertext."""


class PartyId(str, Enum):
    STUDENT = "Student"
    PETER = "Peter"
    MARY = "Mary"
    SITA = "Sita"
    ARIA = "Aria"
    SERVER = "Server"
    UNIVERSITY_PORTAL = "UniversityPortal"
    ATTACKER = "Attacker"


class WireKind(str, Enum):
    PLAIN_TEXT = "PlainText"
    HASH_ONLY = "HashOnly"
    ENVELOPE_PLAIN = "EnvelopePlain"
    CIPHER_TEXT = "CipherText"
    PUBLIC_KEY = "PublicKey"
    SYMMETRIC_KEY_SHARE = "SymmetricKeyShare"


@dataclass(frozen=True)
class WireMessage:
    kind: WireKind
    data: bytes

    @classmethod
    def plain(cls, text: str) -> "WireMessage":
        return cls(WireKind.PLAIN_TEXT, crypto.encode_plain(text))

    @classmethod
    def hash_only(cls, digest: crypto.Digest) -> "WireMessage":
        return cls(WireKind.HASH_ONLY, crypto.encode_hash_only(digest))

    @classmethod
    def envelope(cls, envelope: crypto.Envelope) -> "WireMessage":
        return cls(WireKind.ENVELOPE_PLAIN, crypto.encode_envelope(envelope))

    @classmethod
    def cipher(cls, blob: bytes) -> "WireMessage":
        return cls(WireKind.CIPHER_TEXT, crypto.encode_cipher(blob))

    @classmethod
    def public_key(cls, pair: crypto.KeyPair) -> "WireMessage":
        return cls(WireKind.PUBLIC_KEY, crypto.encode_public_key(pair))

    @classmethod
    def key_share(cls, key: crypto.SymmetricKey) -> "WireMessage":
        return cls(WireKind.SYMMETRIC_KEY_SHARE, crypto.encode_key_share(key))

    def preview(self) -> str:
        return preview_text(self.data.decode("utf-8", errors="replace"))


def preview_text(text: str) -> str:
    """Truncate to the UI animation bound, marking the cut with an ellipsis."""
    if len(text) <= PREVIEW_CHARS:
        return text
    return text[:PREVIEW_CHARS] + ELLIPSIS


# ---------------------------------------------------------------------------
# Attacker behaviors
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PassThrough:
    pass


@dataclass(frozen=True)
class Observe:
    pass


@dataclass(frozen=True)
class ReplacePlainText:
    """Swap the message text; on an envelope, the stale digest is kept."""

    new_text: str


@dataclass(frozen=True)
class ReplaceEnvelope:
    """Swap the message text and recompute the digest to match."""

    new_text: str


@dataclass(frozen=True)
class BitFlipCipher:
    """Flip one bit of the ciphertext payload (bit index past the IV)."""

    offset: int = 0


@dataclass(frozen=True)
class StealKeyThenDecrypt:
    """Record a key share in flight; a later ciphertext becomes readable."""


AttackerBehavior = (
    PassThrough | Observe | ReplacePlainText | ReplaceEnvelope | BitFlipCipher | StealKeyThenDecrypt
)

_LEGAL_KINDS: dict[type, frozenset[WireKind]] = {
    PassThrough: frozenset(WireKind),
    Observe: frozenset(WireKind),
    ReplacePlainText: frozenset({WireKind.PLAIN_TEXT, WireKind.ENVELOPE_PLAIN}),
    ReplaceEnvelope: frozenset({WireKind.ENVELOPE_PLAIN}),
    BitFlipCipher: frozenset({WireKind.CIPHER_TEXT}),
    StealKeyThenDecrypt: frozenset({WireKind.SYMMETRIC_KEY_SHARE}),
}


def behavior_applies(behavior: AttackerBehavior, kind: WireKind) -> bool:
    return kind in _LEGAL_KINDS[type(behavior)]


# ---------------------------------------------------------------------------
# Event traces
# ---------------------------------------------------------------------------

class EventKind(str, Enum):
    TYPED = "Typed"
    SENT = "Sent"
    INTERCEPTED = "Intercepted"
    MODIFIED = "Modified"
    KEY_STOLEN = "KeyStolen"
    DECRYPTED_BY_ATTACKER = "DecryptedByAttacker"
    DELIVERED = "Delivered"
    PARSE_FAILED = "ParseFailed"
    VERIFY_PASSED = "VerifyPassed"
    VERIFY_FAILED = "VerifyFailed"
    ACCEPTED = "Accepted"
    REJECTED = "Rejected"


class Outcome(str, Enum):
    ACCEPTED = "Accepted"
    REJECTED = "Rejected"
    PARSE_ERROR = "ParseError"
    COMPROMISED = "Compromised"


@dataclass(frozen=True)
class TraceEvent:
    seq: int
    actor: PartyId
    kind: EventKind
    detail: str
    payload_preview: str = ""

    def to_record(self) -> dict:
        return {
            "seq": self.seq,
            "actor": self.actor.value,
            "kind": self.kind.value,
            "detail": self.detail,
            "payload_preview": self.payload_preview,
        }

    @classmethod
    def from_record(cls, record: dict) -> "TraceEvent":
        return cls(
            seq=int(record["seq"]),
            actor=PartyId(record["actor"]),
            kind=EventKind(record["kind"]),
            detail=str(record["detail"]),
            payload_preview=str(record["payload_preview"]),
        )


@dataclass
class EventTrace:
    """Ordered, replayable record of one simulation run."""

    events: list[TraceEvent] = field(default_factory=list)
    outcome: Outcome | None = None

    def add(self, actor: PartyId, kind: EventKind, detail: str, payload_preview: str = "") -> TraceEvent:
        event = TraceEvent(
            seq=len(self.events) + 1,
            actor=actor,
            kind=kind,
            detail=detail,
            payload_preview=payload_preview,
        )
        self.events.append(event)
        return event

    def extend(self, other: "EventTrace") -> None:
        for event in other.events:
            self.add(event.actor, event.kind, event.detail, event.payload_preview)

    def finish(self, outcome: Outcome) -> "EventTrace":
        self.outcome = outcome
        problem = self.inconsistency()
        if problem:
            raise ChannelError(f"inconsistent trace: {problem}")
        return self

    def has(self, kind: EventKind) -> bool:
        return any(event.kind is kind for event in self.events)

    def first(self, kind: EventKind) -> TraceEvent | None:
        return next((event for event in self.events if event.kind is kind), None)

    def inconsistency(self) -> str | None:
        """Explain how the outcome or ordering is broken, if it is."""
        if any(event.seq != i + 1 for i, event in enumerate(self.events)):
            return "seq numbers must increase by one from 1"
        if not self.events:
            return "empty trace" if self.outcome is not None else None
        last = self.events[-1].kind
        if self.outcome is Outcome.ACCEPTED:
            if last is not EventKind.ACCEPTED or self.has(EventKind.DECRYPTED_BY_ATTACKER):
                return "Accepted outcome requires a final Accepted event and no attacker decrypt"
        elif self.outcome is Outcome.REJECTED:
            if last is not EventKind.REJECTED:
                return "Rejected outcome requires a final Rejected event"
        elif self.outcome is Outcome.PARSE_ERROR:
            if last is not EventKind.PARSE_FAILED:
                return "ParseError outcome requires a final ParseFailed event"
        elif self.outcome is Outcome.COMPROMISED:
            if not self.has(EventKind.DECRYPTED_BY_ATTACKER):
                return "Compromised outcome requires a DecryptedByAttacker event"
        return None

    def to_records(self) -> dict:
        return {
            "events": [event.to_record() for event in self.events],
            "outcome": self.outcome.value if self.outcome else None,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_records(), ensure_ascii=False)

    @classmethod
    def from_records(cls, records: dict) -> "EventTrace":
        trace = cls(events=[TraceEvent.from_record(r) for r in records["events"]])
        trace.outcome = Outcome(records["outcome"]) if records.get("outcome") else None
        return trace

    @classmethod
    def from_json(cls, text: str) -> "EventTrace":
        return cls.from_records(json.loads(text))


# ---------------------------------------------------------------------------
# Transmission
# ---------------------------------------------------------------------------

_TYPED_DETAIL = {
    WireKind.PLAIN_TEXT: "typed the message",
    WireKind.HASH_ONLY: "computed the hash to send on its own",
    WireKind.ENVELOPE_PLAIN: "typed the message and attached its hash",
    WireKind.CIPHER_TEXT: "prepared the encrypted message",
    WireKind.PUBLIC_KEY: "prepared the public key for sharing",
    WireKind.SYMMETRIC_KEY_SHARE: "prepared the secret key for sharing",
}


def _apply_behavior(
    behavior: AttackerBehavior, msg: WireMessage, trace: EventTrace
) -> WireMessage:
    """Emit the attacker's events and return what actually gets delivered."""
    if isinstance(behavior, PassThrough):
        return msg
    trace.add(PartyId.ATTACKER, EventKind.INTERCEPTED, "intercepted the transmission", msg.preview())
    if isinstance(behavior, Observe):
        return msg
    if isinstance(behavior, ReplacePlainText):
        if msg.kind is WireKind.PLAIN_TEXT:
            altered = WireMessage.plain(behavior.new_text)
            detail = "replaced the message text"
        else:
            old = crypto.decode_envelope(msg.data)
            altered = WireMessage.envelope(crypto.Envelope(body=behavior.new_text, digest=old.digest))
            detail = "replaced the message text but kept the old hash"
        trace.add(PartyId.ATTACKER, EventKind.MODIFIED, detail, altered.preview())
        return altered
    if isinstance(behavior, ReplaceEnvelope):
        altered = WireMessage.envelope(crypto.make_envelope(behavior.new_text))
        trace.add(
            PartyId.ATTACKER,
            EventKind.MODIFIED,
            "replaced both the message and its hash",
            altered.preview(),
        )
        return altered
    if isinstance(behavior, BitFlipCipher):
        blob = bytearray(crypto.decode_cipher(msg.data))
        payload_start = crypto.IV_BYTES
        bit = behavior.offset % ((len(blob) - payload_start) * 8)
        blob[payload_start + bit // 8] ^= 1 << (bit % 8)
        altered = WireMessage.cipher(bytes(blob))
        trace.add(
            PartyId.ATTACKER,
            EventKind.MODIFIED,
            f"flipped one bit of the ciphertext (bit {bit})",
            altered.preview(),
        )
        return altered
    if isinstance(behavior, StealKeyThenDecrypt):
        trace.add(
            PartyId.ATTACKER,
            EventKind.KEY_STOLEN,
            "copied the secret key as it crossed the open channel",
            msg.preview(),
        )
        return msg
    raise IllegalBehavior(f"unhandled behavior {behavior!r}")


def transmit(
    sender: PartyId,
    receiver: PartyId,
    msg: WireMessage,
    behavior: AttackerBehavior,
    trace: EventTrace | None = None,
) -> tuple[WireMessage, EventTrace]:
    """Send one message across the wire under the given attacker behavior.

    Events run Typed, Sent, then any attacker activity, then Delivered.
    The returned message is what the receiver actually gets.
    """
    if PartyId.ATTACKER in (sender, receiver):
        raise IllegalParty("the attacker is never a legitimate endpoint")
    if not behavior_applies(behavior, msg.kind):
        raise IllegalBehavior(f"{type(behavior).__name__} does not apply to {msg.kind.value}")
    if trace is None:
        trace = EventTrace()
    trace.add(sender, EventKind.TYPED, _TYPED_DETAIL[msg.kind], msg.preview())
    trace.add(sender, EventKind.SENT, f"sent to {receiver.value}", msg.preview())
    delivered = _apply_behavior(behavior, msg, trace)
    trace.add(receiver, EventKind.DELIVERED, f"arrived at {receiver.value}", delivered.preview())
    return delivered, trace


def steal_key_session(
    key_share: WireMessage,
    later_cipher: WireMessage,
    sender: PartyId = PartyId.ARIA,
    receiver: PartyId = PartyId.SERVER,
    trace: EventTrace | None = None,
) -> EventTrace:
    """Two-step key theft: observe the key share, then read a later cipher.

    The trace ends Compromised; the receiver still gets (and can decrypt)
    the ciphertext, which is exactly what makes the theft invisible.
    """
    if key_share.kind is not WireKind.SYMMETRIC_KEY_SHARE:
        raise IllegalBehavior("first message must be a symmetric key share")
    if later_cipher.kind is not WireKind.CIPHER_TEXT:
        raise IllegalBehavior("second message must be a ciphertext")
    stolen = crypto.decode_key_share(key_share.data)
    if trace is None:
        trace = EventTrace()
    transmit(sender, receiver, key_share, StealKeyThenDecrypt(), trace)
    delivered, _ = transmit(sender, receiver, later_cipher, Observe(), trace)
    blob = crypto.decode_cipher(delivered.data)
    try:
        plaintext = crypto.sym_decrypt(stolen, crypto.Ciphertext.from_blob(blob))
    except (crypto.DecryptError, crypto.WireFormatError) as exc:
        raise InternalInconsistency("ciphertext does not decrypt under the stolen key") from exc
    trace.add(
        PartyId.ATTACKER,
        EventKind.DECRYPTED_BY_ATTACKER,
        "decrypted the message with the stolen key",
        preview_text(plaintext.decode("utf-8", errors="replace")),
    )
    trace.add(
        receiver,
        EventKind.ACCEPTED,
        f"{receiver.value} accepted the message, unaware it was read in transit",
        delivered.preview(),
    )
    return trace.finish(Outcome.COMPROMISED)
