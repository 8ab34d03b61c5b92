"""The embedded lesson terminal: a fixed command vocabulary per module,
executed strictly in order, with guidance when a step is attempted too
early. The final send of each module emits the success trace the UI plays
as an animation.

Commands are case-sensitive exact matches; a near miss (edit distance at
most 2) earns a suggestion. Order and unknown-command errors never change
the session.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

from . import crypto
from .channel import EventKind, EventTrace, Outcome, PartyId, PassThrough, WireMessage, transmit
from .scenarios import (
    DEFAULT_CREDENTIALS,
    DEFAULT_MESSAGE,
    ActorKeys,
    ModuleId,
    derived_rng,
)

HELP_COMMAND = "help"


@dataclass(frozen=True)
class CommandToken:
    name: str


@dataclass(frozen=True)
class UnknownCommand:
    token: str
    suggestion: str | None = None


class FeedbackStatus(Enum):
    OK = "Ok"
    ORDER_ERROR = "OrderError"
    UNKNOWN_COMMAND = "UnknownCommand"
    ALREADY_DONE = "AlreadyDone"


@dataclass(frozen=True)
class Feedback:
    status: FeedbackStatus
    text: str
    trace: EventTrace | None = None


@dataclass(frozen=True)
class _Command:
    name: str
    description: str
    # OrderError pieces, following the one feedback string the lesson fixes
    # verbatim: "There is no <artifact> for <purpose>. Please <hint> to
    # perform the <purpose>". The first command of a grammar has no
    # prerequisite and never raises an order error.
    artifact: str = ""
    purpose: str = ""
    hint: str = ""

    def order_error(self) -> str:
        return f"There is no {self.artifact} for {self.purpose}. Please {self.hint} to perform the {self.purpose}"


GRAMMARS: dict[ModuleId, tuple[_Command, ...]] = {
    ModuleId.HASHING: (
        _Command("generateHash", "Create the SHA-256 hash of your message"),
        _Command(
            "sendMessageHash",
            "Send the message together with its hash",
            artifact="hash",
            purpose="sending",
            hint="generate a hash",
        ),
    ),
    ModuleId.SYMMETRIC: (
        _Command("generateKey", "Create a shared secret key"),
        _Command(
            "encryptMessage",
            "Encrypt the message and its hash with the key",
            artifact="key",
            purpose="encryption",
            hint="generate a key",
        ),
        _Command(
            "sendEncryptedMessage",
            "Send the encrypted message",
            artifact="encrypted message",
            purpose="sending",
            hint="encrypt the message",
        ),
    ),
    ModuleId.ASYMMETRIC: (
        _Command("generateAriaPrivateKey", "Create Aria's private key and keep it secret"),
        _Command(
            "generateAriaPublicKey",
            "Create Aria's public key, safe to share",
            artifact="private key",
            purpose="pairing",
            hint="generate Aria's private key",
        ),
        _Command(
            "grabServerPublicKey",
            "Fetch the server's public key",
            artifact="public key",
            purpose="the exchange",
            hint="generate Aria's public key",
        ),
        _Command(
            "encryptMessageServerPublicKey",
            "Encrypt the login with the server's public key",
            artifact="server key",
            purpose="encryption",
            hint="grab the server's public key",
        ),
        _Command(
            "sendEncryptedMessage",
            "Send the encrypted login",
            artifact="encrypted message",
            purpose="sending",
            hint="encrypt the login with the server's public key",
        ),
    ),
}

_SENDERS = {
    ModuleId.HASHING: (PartyId.PETER, PartyId.UNIVERSITY_PORTAL),
    ModuleId.SYMMETRIC: (PartyId.MARY, PartyId.SITA),
    ModuleId.ASYMMETRIC: (PartyId.ARIA, PartyId.SERVER),
}


def command_names(module: ModuleId) -> list[str]:
    return [cmd.name for cmd in GRAMMARS[module]]


@dataclass
class TerminalSession:
    """One student's terminal for one module.

    The lesson orchestrator supplies the canonical message or credentials;
    there is no message-entry command. With a seed, every artifact the
    session produces is reproducible.
    """

    module: ModuleId
    message: str
    credentials: crypto.Credentials
    seed: int | None = None
    keys: ActorKeys | None = None
    completed: list[str] = field(default_factory=list)
    artifacts: dict[str, object] = field(default_factory=dict)
    transcript: list[tuple[str, Feedback]] = field(default_factory=list)

    def __post_init__(self) -> None:
        if self.keys is None:
            self.keys = ActorKeys.for_seed(self.seed)

    @property
    def done(self) -> bool:
        return len(self.completed) == len(GRAMMARS[self.module])


def new_session(
    module: ModuleId,
    message: str | None = None,
    credentials: crypto.Credentials | None = None,
    seed: int | None = None,
) -> TerminalSession:
    return TerminalSession(
        module=module,
        message=message if message is not None else DEFAULT_MESSAGE.get(module, ""),
        credentials=credentials if credentials is not None else DEFAULT_CREDENTIALS,
        seed=seed,
    )


def _edit_distance(a: str, b: str, cap: int = 3) -> int:
    if abs(len(a) - len(b)) > cap:
        return cap + 1
    previous = list(range(len(b) + 1))
    for i, ca in enumerate(a, start=1):
        current = [i]
        for j, cb in enumerate(b, start=1):
            current.append(min(previous[j] + 1, current[j - 1] + 1, previous[j - 1] + (ca != cb)))
        previous = current
    return previous[-1]


def parse(line: str, module: ModuleId) -> CommandToken | UnknownCommand:
    """Trim and match the line against the module grammar plus ``help``."""
    token = line.strip()
    known = command_names(module) + [HELP_COMMAND]
    if token in known:
        return CommandToken(token)
    suggestion = min(known, key=lambda name: _edit_distance(token, name))
    if _edit_distance(token, suggestion) > 2:
        return UnknownCommand(token)
    return UnknownCommand(token, suggestion)


def help_text(session: TerminalSession) -> str:
    lines = [f"Commands for the {session.module.value} lesson, in this order:"]
    for i, cmd in enumerate(GRAMMARS[session.module], start=1):
        lines.append(f"  {i}. {cmd.name} - {cmd.description}")
    lines.append("Type help to see this list again.")
    return "\n".join(lines)


# ---------------------------------------------------------------------------
# Command actions: each stores its artifact and reports what happened.
# The sender-side values are real crypto over the session's message.
# ---------------------------------------------------------------------------

def _iv_rng(session: TerminalSession):
    return derived_rng(session.seed, "iv", session.module.value)


def _oaep_rng(session: TerminalSession):
    return derived_rng(session.seed, "oaep", session.module.value)


def _do_generate_hash(session: TerminalSession) -> str:
    digest = crypto.hash_message(session.message)
    session.artifacts["digest"] = digest
    return f"Hash created: {digest.hex}"


def _do_send_message_hash(session: TerminalSession) -> tuple[str, EventTrace]:
    digest: crypto.Digest = session.artifacts["digest"]  # type: ignore[assignment]
    wire = WireMessage.envelope(crypto.Envelope(body=session.message, digest=digest))
    session.artifacts["sent_wire"] = wire
    sender, receiver = _SENDERS[session.module]
    delivered, trace = transmit(sender, receiver, wire, PassThrough())
    envelope = crypto.decode_envelope(delivered.data)
    assert crypto.verify_envelope(envelope) is crypto.VerifyResult.ACCEPT
    trace.add(receiver, EventKind.VERIFY_PASSED, "recomputed hash matches the attached hash")
    trace.add(receiver, EventKind.ACCEPTED, f'accepted the message: "{envelope.body}"')
    trace.finish(Outcome.ACCEPTED)
    return "Message and hash sent. The portal re-hashed the text, matched it, and accepted it", trace


def _do_generate_key(session: TerminalSession) -> str:
    assert session.keys is not None
    key = session.keys.chat_key if session.seed is not None else crypto.generate_sym_key()
    session.artifacts["key"] = key
    return f"Secret key {key.id} created and shared with the other side"


def _do_encrypt_message(session: TerminalSession) -> str:
    key: crypto.SymmetricKey = session.artifacts["key"]  # type: ignore[assignment]
    envelope_bytes = crypto.encode_envelope(crypto.make_envelope(session.message))
    cipher = crypto.sym_encrypt(key, envelope_bytes, _iv_rng(session))
    session.artifacts["cipher"] = cipher
    return f"Message and hash encrypted: {cipher.b64[:44]}..."


def _do_send_encrypted_symmetric(session: TerminalSession) -> tuple[str, EventTrace]:
    key: crypto.SymmetricKey = session.artifacts["key"]  # type: ignore[assignment]
    cipher: crypto.Ciphertext = session.artifacts["cipher"]  # type: ignore[assignment]
    wire = WireMessage.cipher(cipher.blob)
    session.artifacts["sent_wire"] = wire
    sender, receiver = _SENDERS[session.module]
    delivered, trace = transmit(sender, receiver, wire, PassThrough())
    plaintext = crypto.sym_decrypt(key, crypto.Ciphertext.from_blob(crypto.decode_cipher(delivered.data)))
    envelope = crypto.decode_envelope(plaintext)
    assert crypto.verify_envelope(envelope) is crypto.VerifyResult.ACCEPT
    trace.add(receiver, EventKind.VERIFY_PASSED, "decrypted; recomputed hash matches")
    trace.add(receiver, EventKind.ACCEPTED, f'accepted the message: "{envelope.body}"')
    trace.finish(Outcome.ACCEPTED)
    return "Encrypted message sent. The other portal decrypted it, checked the hash, and accepted it", trace


def _do_generate_aria_private(session: TerminalSession) -> str:
    assert session.keys is not None
    pair = session.keys.aria if session.seed is not None else crypto.generate_keypair(PartyId.ARIA.value)
    session.artifacts["aria_pair"] = pair
    return "Aria's private key created. It never leaves this device"


def _do_generate_aria_public(session: TerminalSession) -> str:
    pair: crypto.KeyPair = session.artifacts["aria_pair"]  # type: ignore[assignment]
    session.artifacts["aria_public"] = pair.public_key
    return "Aria's public key created. Anyone may see it"


def _do_grab_server_public(session: TerminalSession) -> str:
    assert session.keys is not None
    session.artifacts["server_public"] = session.keys.server.public_key
    return "Grabbed the server's public key"


def _do_encrypt_with_server_key(session: TerminalSession) -> str:
    public_key = session.artifacts["server_public"]
    blob = crypto.asym_encrypt(public_key, crypto.encode_credentials(session.credentials), _oaep_rng(session))  # type: ignore[arg-type]
    session.artifacts["cipher_blob"] = blob
    return "Login encrypted with the server's public key. Only the server can open it"


def _do_send_encrypted_asymmetric(session: TerminalSession) -> tuple[str, EventTrace]:
    assert session.keys is not None
    blob: bytes = session.artifacts["cipher_blob"]  # type: ignore[assignment]
    wire = WireMessage.cipher(blob)
    session.artifacts["sent_wire"] = wire
    sender, receiver = _SENDERS[session.module]
    delivered, trace = transmit(sender, receiver, wire, PassThrough())
    recovered = crypto.asym_decrypt(session.keys.server.private_key, crypto.decode_cipher(delivered.data))
    who = crypto.decode_credentials(recovered).username
    trace.add(receiver, EventKind.ACCEPTED, f"unlocked the login with the server's private key and logged in {who}")
    trace.finish(Outcome.ACCEPTED)
    return "Encrypted login sent. The server unlocked it with its private key and let Aria in", trace


_ACTIONS = {
    "generateHash": _do_generate_hash,
    "sendMessageHash": _do_send_message_hash,
    "generateKey": _do_generate_key,
    "encryptMessage": _do_encrypt_message,
    (ModuleId.SYMMETRIC, "sendEncryptedMessage"): _do_send_encrypted_symmetric,
    "generateAriaPrivateKey": _do_generate_aria_private,
    "generateAriaPublicKey": _do_generate_aria_public,
    "grabServerPublicKey": _do_grab_server_public,
    "encryptMessageServerPublicKey": _do_encrypt_with_server_key,
    (ModuleId.ASYMMETRIC, "sendEncryptedMessage"): _do_send_encrypted_asymmetric,
}


def execute(session: TerminalSession, token: CommandToken | UnknownCommand) -> Feedback:
    """Apply one parsed command to the session.

    Only a command arriving in grammar order mutates the session; every
    other outcome is pure feedback.
    """
    if isinstance(token, UnknownCommand):
        text = f"Unknown command: {token.token}."
        if token.suggestion:
            text += f" Did you mean {token.suggestion}?"
        text += " Type help to see the commands"
        return Feedback(FeedbackStatus.UNKNOWN_COMMAND, text)
    if token.name == HELP_COMMAND:
        return Feedback(FeedbackStatus.OK, help_text(session))
    grammar = GRAMMARS[session.module]
    if token.name in session.completed:
        return Feedback(FeedbackStatus.ALREADY_DONE, f"You already ran {token.name}. Nothing changed")
    expected = grammar[len(session.completed)]
    if token.name != expected.name:
        attempted = next(cmd for cmd in grammar if cmd.name == token.name)
        return Feedback(FeedbackStatus.ORDER_ERROR, attempted.order_error())
    action = _ACTIONS.get((session.module, token.name)) or _ACTIONS[token.name]
    result = action(session)
    session.completed.append(token.name)
    if isinstance(result, tuple):
        text, trace = result
        return Feedback(FeedbackStatus.OK, text, trace)
    return Feedback(FeedbackStatus.OK, result)


def run_line(session: TerminalSession, line: str) -> Feedback:
    """Parse and execute one input line, recording it in the transcript."""
    feedback = execute(session, parse(line, session.module))
    session.transcript.append((line, feedback))
    return feedback


@dataclass(frozen=True)
class OrderingReport:
    module: ModuleId
    total: int
    successful: tuple[tuple[str, ...], ...]


def enumerate_orderings(module: ModuleId, seed: int = 0) -> OrderingReport:
    """Run every permutation of the module's commands against a fresh
    session and report which ones complete. A permutation succeeds only if
    every command in it returns Ok."""
    from itertools import permutations

    names = command_names(module)
    winners = []
    for perm in permutations(names):
        session = new_session(module, seed=seed)
        if all(run_line(session, name).status is FeedbackStatus.OK for name in perm):
            winners.append(perm)
    return OrderingReport(module=module, total=len(list(permutations(names))), successful=tuple(winners))
