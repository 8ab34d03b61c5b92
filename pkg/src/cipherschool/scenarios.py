"""The lesson scenarios: paired ideal/attack experiences plus the three
mitigation options per module, each run end to end through real crypto and
the simulated wire, then classified.

Classification is a fixed oracle matrix; the traces exist so students can
watch WHY each cell earns its label. Runs are deterministic whenever a seed
is supplied: keys, IVs, and padding randomness all derive from it.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from enum import Enum
from functools import lru_cache

from . import crypto
from .channel import (
    BitFlipCipher,
    EventKind,
    EventTrace,
    Observe,
    Outcome,
    PartyId,
    PassThrough,
    ReplaceEnvelope,
    ReplacePlainText,
    WireMessage,
    steal_key_session,
    transmit,
)


class ModuleId(str, Enum):
    HASHING = "hashing"
    SYMMETRIC = "symmetric"
    ASYMMETRIC = "asymmetric"


class Classification(str, Enum):
    SECURE = "Secure"
    INSECURE = "Insecure"
    INCORRECT = "Incorrect"


class InputMismatch(Exception):
    """Student input does not fit the module (text vs credentials)."""


@dataclass(frozen=True)
class Verdict:
    classification: Classification
    reason: str


@dataclass(frozen=True)
class ScenarioSpec:
    module: ModuleId
    option: int
    attacked: bool = True
    narrative: dict | None = None

    def __post_init__(self) -> None:
        if self.option not in (1, 2, 3):
            raise ValueError("option must be 1, 2, or 3")


@dataclass(frozen=True)
class ScenarioRun:
    """Everything a grader or property test may want to inspect."""

    trace: EventTrace
    verdict: Verdict
    sent: WireMessage
    delivered: WireMessage | None
    attacker_view: bytes | None
    attacker_recovered: bytes | None


# Canonical lesson texts; the bundled content pack carries the same values
# and may override them per classroom.
DEFAULT_MESSAGE = {
    ModuleId.HASHING: "I am excited to apply to your school.",
    ModuleId.SYMMETRIC: "I got a promotion",
}
DEFAULT_ATTACKER_TEXT = {
    ModuleId.HASHING: "Please drop my application from your list.",
    ModuleId.SYMMETRIC: "I lost my job, can you transfer money to my account.",
}
DEFAULT_CREDENTIALS = crypto.Credentials("aria", "sunny-day-42")

_PARTIES = {
    ModuleId.HASHING: (PartyId.PETER, PartyId.UNIVERSITY_PORTAL),
    ModuleId.SYMMETRIC: (PartyId.MARY, PartyId.SITA),
    ModuleId.ASYMMETRIC: (PartyId.ARIA, PartyId.SERVER),
}

_VERDICTS: dict[tuple[ModuleId, int], Verdict] = {
    (ModuleId.HASHING, 1): Verdict(
        Classification.INSECURE, "Anyone on the wire can change plain text and nobody can tell."
    ),
    (ModuleId.HASHING, 2): Verdict(
        Classification.INCORRECT, "A bare hash is not a message; the portal cannot parse it."
    ),
    (ModuleId.HASHING, 3): Verdict(
        Classification.SECURE, "The portal recomputes the hash, so any change to the text is caught."
    ),
    (ModuleId.SYMMETRIC, 1): Verdict(
        Classification.INSECURE, "An attacker can replace both the text and its hash in one move."
    ),
    (ModuleId.SYMMETRIC, 2): Verdict(
        Classification.SECURE, "With the shared key the attacker can neither read nor quietly modify."
    ),
    (ModuleId.SYMMETRIC, 3): Verdict(
        Classification.INCORRECT, "The receiver never learns the hash used as the key, so nothing opens."
    ),
    (ModuleId.ASYMMETRIC, 1): Verdict(
        Classification.INSECURE, "The shared key crosses the open channel, so an attacker can steal it."
    ),
    (ModuleId.ASYMMETRIC, 2): Verdict(
        Classification.INCORRECT, "Only Aria's private key opens this, and the server does not have it."
    ),
    (ModuleId.ASYMMETRIC, 3): Verdict(
        Classification.SECURE, "Only the server's private key opens it, and that key never travels."
    ),
}


def classify(module: ModuleId, option: int) -> Verdict:
    """The fixed security label for one of the nine mitigation options."""
    if option not in (1, 2, 3):
        raise ValueError("option must be 1, 2, or 3")
    return _VERDICTS[(module, option)]


def derived_rng(seed: int | None, *tags: str) -> random.Random | None:
    """An independent, named random stream derived from the run seed.

    Seeds go through the string path of ``random.Random`` (stable across
    processes), never through ``hash()``.
    """
    if seed is None:
        return None
    return random.Random("|".join((str(seed),) + tags))


@dataclass(frozen=True)
class ActorKeys:
    """The long-lived keys of the simulated cast, derived from one seed."""

    chat_key: crypto.SymmetricKey
    login_key: crypto.SymmetricKey
    aria: crypto.KeyPair
    server: crypto.KeyPair

    @staticmethod
    @lru_cache(maxsize=32)
    def for_seed(seed: int | None) -> "ActorKeys":
        return ActorKeys(
            chat_key=crypto.generate_sym_key(derived_rng(seed, "key", "chat")),
            login_key=crypto.generate_sym_key(derived_rng(seed, "key", "login")),
            aria=crypto.generate_keypair(PartyId.ARIA.value, derived_rng(seed, "rsa", "aria")),
            server=crypto.generate_keypair(PartyId.SERVER.value, derived_rng(seed, "rsa", "server")),
        )


def _check_input(module: ModuleId, student_input: object) -> None:
    if module is ModuleId.ASYMMETRIC:
        if not isinstance(student_input, crypto.Credentials):
            raise InputMismatch("the login module needs Credentials, not plain text")
    elif not isinstance(student_input, str):
        raise InputMismatch(f"the {module.value} module needs a text message")


def _accept(trace: EventTrace, receiver: PartyId, detail: str, preview: str = "") -> EventTrace:
    trace.add(receiver, EventKind.ACCEPTED, detail, preview)
    return trace.finish(Outcome.ACCEPTED)


def _reject(trace: EventTrace, receiver: PartyId, why: str) -> EventTrace:
    trace.add(receiver, EventKind.VERIFY_FAILED, why)
    trace.add(receiver, EventKind.REJECTED, "the message was rejected")
    return trace.finish(Outcome.REJECTED)


def _parse_fail(trace: EventTrace, receiver: PartyId, why: str) -> EventTrace:
    trace.add(receiver, EventKind.PARSE_FAILED, why)
    return trace.finish(Outcome.PARSE_ERROR)


def _receive_envelope(trace: EventTrace, receiver: PartyId, delivered: WireMessage) -> EventTrace:
    """The digest-checking receive pipeline shared by hashing option 3 and
    the symmetric flows once a plaintext envelope is in hand."""
    try:
        envelope = crypto.decode_envelope(delivered.data)
    except crypto.WireFormatError as exc:
        return _parse_fail(trace, receiver, f"could not parse the delivery: {exc}")
    if crypto.verify_envelope(envelope) is crypto.VerifyResult.ACCEPT:
        trace.add(receiver, EventKind.VERIFY_PASSED, "recomputed hash matches the attached hash")
        return _accept(trace, receiver, f'accepted the message: "{envelope.body}"')
    return _reject(trace, receiver, "recomputed hash does not match the attached hash")


def _run_hashing(option: int, attacked: bool, text: str, attacker_text: str) -> ScenarioRun:
    sender, receiver = _PARTIES[ModuleId.HASHING]
    verdict = classify(ModuleId.HASHING, option)
    if option == 1:
        msg = WireMessage.plain(text)
        behavior = ReplacePlainText(attacker_text) if attacked else PassThrough()
    elif option == 2:
        msg = WireMessage.hash_only(crypto.hash_message(text))
        behavior = Observe() if attacked else PassThrough()
    else:
        msg = WireMessage.envelope(crypto.make_envelope(text))
        behavior = ReplacePlainText(attacker_text) if attacked else PassThrough()
    delivered, trace = transmit(sender, receiver, msg, behavior)
    if option == 1:
        body = crypto.decode_plain(delivered.data)
        _accept(trace, receiver, f'accepted the application without any check: "{body}"')
    elif option == 2:
        _parse_fail(trace, receiver, "expected application text, got only a hash value")
    else:
        _receive_envelope(trace, receiver, delivered)
    view = msg.data if not isinstance(behavior, PassThrough) else None
    return ScenarioRun(trace, verdict, msg, delivered, view, None)


def _run_symmetric(
    option: int,
    attacked: bool,
    text: str,
    attacker_text: str,
    keys: ActorKeys,
    ivs: random.Random | None,
) -> ScenarioRun:
    sender, receiver = _PARTIES[ModuleId.SYMMETRIC]
    verdict = classify(ModuleId.SYMMETRIC, option)
    if option == 1:
        msg = WireMessage.envelope(crypto.make_envelope(text))
        behavior = ReplaceEnvelope(attacker_text) if attacked else PassThrough()
        delivered, trace = transmit(sender, receiver, msg, behavior)
        _receive_envelope(trace, receiver, delivered)
    elif option == 2:
        envelope_bytes = crypto.encode_envelope(crypto.make_envelope(text))
        cipher = crypto.sym_encrypt(keys.chat_key, envelope_bytes, ivs)
        msg = WireMessage.cipher(cipher.blob)
        behavior = BitFlipCipher(0) if attacked else PassThrough()
        delivered, trace = transmit(sender, receiver, msg, behavior)
        try:
            plaintext = crypto.sym_decrypt(
                keys.chat_key, crypto.Ciphertext.from_blob(crypto.decode_cipher(delivered.data))
            )
            envelope = crypto.decode_envelope(plaintext)
        except (crypto.DecryptError, crypto.WireFormatError):
            _reject(trace, receiver, "decryption gave no readable message; it was changed in transit")
        else:
            if crypto.verify_envelope(envelope) is crypto.VerifyResult.ACCEPT:
                trace.add(receiver, EventKind.VERIFY_PASSED, "decrypted; recomputed hash matches")
                _accept(trace, receiver, f'accepted the message: "{envelope.body}"')
            else:
                _reject(trace, receiver, "decrypted, but the recomputed hash does not match")
    else:
        digest_key = crypto.SymmetricKey(crypto.hash_message(text).value)
        cipher = crypto.sym_encrypt(digest_key, crypto.encode_plain(text), ivs)
        msg = WireMessage.cipher(cipher.blob)
        behavior = Observe() if attacked else PassThrough()
        delivered, trace = transmit(sender, receiver, msg, behavior)
        try:
            plaintext = crypto.sym_decrypt(
                keys.chat_key, crypto.Ciphertext.from_blob(crypto.decode_cipher(delivered.data))
            )
            crypto.decode_plain(plaintext)
        except (crypto.DecryptError, crypto.WireFormatError):
            _parse_fail(trace, receiver, "the shared key does not open this; the hash used as the key was never shared")
        else:  # pragma: no cover - astronomically unlikely padding fluke
            _parse_fail(trace, receiver, "the decrypted bytes made no sense")
    view = msg.data if not isinstance(behavior, PassThrough) else None
    return ScenarioRun(trace, verdict, msg, delivered, view, None)


def _run_asymmetric(
    option: int,
    attacked: bool,
    creds: crypto.Credentials,
    keys: ActorKeys,
    ivs: random.Random | None,
    oaep: random.Random | None,
) -> ScenarioRun:
    sender, receiver = _PARTIES[ModuleId.ASYMMETRIC]
    verdict = classify(ModuleId.ASYMMETRIC, option)
    creds_bytes = crypto.encode_credentials(creds)
    if option == 1:
        share = WireMessage.key_share(keys.login_key)
        cipher = WireMessage.cipher(crypto.sym_encrypt(keys.login_key, creds_bytes, ivs).blob)
        if attacked:
            trace = steal_key_session(share, cipher, sender, receiver)
            return ScenarioRun(trace, verdict, cipher, cipher, share.data + cipher.data, creds_bytes)
        trace = EventTrace()
        transmit(sender, receiver, share, PassThrough(), trace)
        delivered, _ = transmit(sender, receiver, cipher, PassThrough(), trace)
        recovered = crypto.sym_decrypt(
            keys.login_key, crypto.Ciphertext.from_blob(crypto.decode_cipher(delivered.data))
        )
        who = crypto.decode_credentials(recovered).username
        _accept(trace, receiver, f"decrypted with the shared key and logged in {who}")
        return ScenarioRun(trace, verdict, cipher, delivered, None, None)
    if option == 2:
        blob = crypto.asym_encrypt(keys.aria.public_key, creds_bytes, oaep)
        msg = WireMessage.cipher(blob)
        behavior: PassThrough | Observe = Observe() if attacked else PassThrough()
        delivered, trace = transmit(sender, receiver, msg, behavior)
        try:
            crypto.asym_decrypt(keys.server.private_key, crypto.decode_cipher(delivered.data))
        except crypto.DecryptError:
            _parse_fail(trace, receiver, "cannot decrypt: this was locked with Aria's public key, not the server's")
        else:  # pragma: no cover - wrong-key OAEP decrypt cannot succeed
            _parse_fail(trace, receiver, "the decrypted bytes made no sense")
        view = msg.data if attacked else None
        return ScenarioRun(trace, verdict, msg, delivered, view, None)
    blob = crypto.asym_encrypt(keys.server.public_key, creds_bytes, oaep)
    msg = WireMessage.cipher(blob)
    behavior = Observe() if attacked else PassThrough()
    delivered, trace = transmit(sender, receiver, msg, behavior)
    recovered = crypto.asym_decrypt(keys.server.private_key, crypto.decode_cipher(delivered.data))
    who = crypto.decode_credentials(recovered).username
    _accept(trace, receiver, f"unlocked the login with the server's private key and logged in {who}")
    view = msg.data if attacked else None
    return ScenarioRun(trace, verdict, msg, delivered, view, None)


def run_option_detailed(
    spec: ScenarioSpec,
    student_input: str | crypto.Credentials,
    seed: int | None = None,
    keys: ActorKeys | None = None,
    attacker_text: str | None = None,
) -> ScenarioRun:
    """Run one mitigation option end to end and classify it."""
    _check_input(spec.module, student_input)
    keys = keys if keys is not None else ActorKeys.for_seed(seed)
    ivs = derived_rng(seed, "iv", spec.module.value)
    if spec.module is ModuleId.HASHING:
        text = attacker_text or DEFAULT_ATTACKER_TEXT[ModuleId.HASHING]
        return _run_hashing(spec.option, spec.attacked, str(student_input), text)
    if spec.module is ModuleId.SYMMETRIC:
        text = attacker_text or DEFAULT_ATTACKER_TEXT[ModuleId.SYMMETRIC]
        return _run_symmetric(spec.option, spec.attacked, str(student_input), text, keys, ivs)
    oaep = derived_rng(seed, "oaep", spec.module.value)
    assert isinstance(student_input, crypto.Credentials)
    return _run_asymmetric(spec.option, spec.attacked, student_input, keys, ivs, oaep)


def run_option(
    spec: ScenarioSpec,
    student_input: str | crypto.Credentials,
    seed: int | None = None,
    keys: ActorKeys | None = None,
    attacker_text: str | None = None,
) -> tuple[EventTrace, Verdict]:
    run = run_option_detailed(spec, student_input, seed=seed, keys=keys, attacker_text=attacker_text)
    return run.trace, run.verdict


def run_experience(
    module: ModuleId,
    attacked: bool,
    student_input: str | crypto.Credentials,
    seed: int | None = None,
    keys: ActorKeys | None = None,
    attacker_text: str | None = None,
) -> EventTrace:
    """The concrete-experience simulation: the module's everyday flow,
    either ideal or with the module's canonical attacker on the wire.

    Hashing sends plain text (the attacked run is silently altered yet
    accepted); the symmetric lesson sends text plus hash (the attacked run
    replaces both); the login lesson encrypts under a shared key (the
    attacked run steals that key in flight).
    """
    _check_input(module, student_input)
    keys = keys if keys is not None else ActorKeys.for_seed(seed)
    ivs = derived_rng(seed, "iv", module.value)
    if module is ModuleId.HASHING:
        text = attacker_text or DEFAULT_ATTACKER_TEXT[module]
        return _run_hashing(1, attacked, str(student_input), text).trace
    if module is ModuleId.SYMMETRIC:
        text = attacker_text or DEFAULT_ATTACKER_TEXT[module]
        return _run_symmetric(1, attacked, str(student_input), text, keys, ivs).trace
    return _run_asymmetric(1, attacked, student_input, keys, ivs, None).trace  # type: ignore[arg-type]


def trace_verdict_consistent(trace: EventTrace, verdict: Verdict) -> bool:
    """Does the observed run support the claimed classification?

    Secure means the tamper was rejected or the attacker got nothing
    useful; Incorrect means the protocol broke on its own; Insecure means
    a tampered or stolen message went through.
    """
    attacker_won = trace.has(EventKind.MODIFIED) or trace.has(EventKind.DECRYPTED_BY_ATTACKER)
    if verdict.classification is Classification.SECURE:
        if trace.outcome is Outcome.REJECTED:
            return True
        return trace.outcome is Outcome.ACCEPTED and not attacker_won and not trace.has(EventKind.KEY_STOLEN)
    if verdict.classification is Classification.INSECURE:
        if trace.outcome is Outcome.COMPROMISED:
            return True
        return trace.outcome is Outcome.ACCEPTED and trace.has(EventKind.MODIFIED)
    return trace.outcome is Outcome.PARSE_ERROR
