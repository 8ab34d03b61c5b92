"""Hands-on cryptography lessons built around real attack simulations.

Each lesson walks one concept (hashing, symmetric cryptography, asymmetric
cryptography) through the same cycle: watch a transmission succeed and then
get attacked, talk the attack over with a coach, try three candidate fixes
and learn which one holds, implement the secure flow in a guided terminal,
and take a short quiz. Everything runs on real SHA-256 / AES / RSA, so the
traces students watch are the truth.
"""

from .channel import (
    AttackerBehavior,
    BitFlipCipher,
    EventKind,
    EventTrace,
    Observe,
    Outcome,
    PartyId,
    PassThrough,
    ReplaceEnvelope,
    ReplacePlainText,
    StealKeyThenDecrypt,
    TraceEvent,
    WireKind,
    WireMessage,
    steal_key_session,
    transmit,
)
from .crypto import (
    Ciphertext,
    Credentials,
    CryptoError,
    DecryptError,
    Digest,
    Envelope,
    KeyPair,
    PlaintextTooLong,
    SymmetricKey,
    VerifyResult,
    WireFormatError,
    asym_decrypt,
    asym_encrypt,
    generate_keypair,
    generate_sym_key,
    hash_message,
    make_envelope,
    sym_decrypt,
    sym_encrypt,
    verify_envelope,
)
from .readability import InvalidText, readability_grade
from .scenarios import (
    ActorKeys,
    Classification,
    InputMismatch,
    ModuleId,
    ScenarioRun,
    ScenarioSpec,
    Verdict,
    classify,
    run_experience,
    run_option,
    run_option_detailed,
    trace_verdict_consistent,
)
from .stats import DegenerateSample, PairedSample, TTestResult, paired_t_test
from .terminal import (
    Feedback,
    FeedbackStatus,
    OrderingReport,
    TerminalSession,
    enumerate_orderings,
    execute,
    help_text,
    new_session,
    parse,
    run_line,
)

__version__ = "0.1.0"
