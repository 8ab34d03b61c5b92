"""Acceptance suite: one test per release criterion, each printing a
single PASS line with its measurements (run with ``pytest -s`` to see
them). Tolerances are pinned here, not deferred anywhere.
"""

import random
import string
import time

import pytest
import scipy.stats
import yaml
from fastapi.testclient import TestClient

from cipherschool import crypto
from cipherschool.channel import EventKind, Outcome
from cipherschool.coach import (
    RecordingProvider,
    ReplayProvider,
    Source,
    Speaker,
    reply,
    split_sentences,
    start_reflection,
)
from cipherschool.crypto import Credentials
from cipherschool.lessons import load_content_pack, validate_content_pack
from cipherschool.readability import readability_grade
from cipherschool.scenarios import (
    DEFAULT_ATTACKER_TEXT,
    ModuleId,
    ScenarioSpec,
    classify,
    run_experience,
    run_option,
    trace_verdict_consistent,
)
from cipherschool.stats import DegenerateSample, PairedSample, paired_t_test
from cipherschool.terminal import FeedbackStatus, command_names, enumerate_orderings, new_session, run_line

INPUTS_PER_CELL = 120
SYM_ROUND_TRIPS = 10_000
ASYM_ROUND_TRIPS = 100
QUIZ_VECTORS = 10_000
T_TEST_SAMPLES = 1_000
T_TEST_TOLERANCE = 1e-9
MAX_GRADE = 8.0


def announce(name: str, detail: str) -> None:
    print(f"[PASS] {name}: {detail}")


def random_text(rng: random.Random) -> str:
    alphabet = string.ascii_letters + string.digits + " .,!?'"
    return "".join(rng.choices(alphabet, k=rng.randint(1, 120)))


def random_credentials(rng: random.Random) -> Credentials:
    alphabet = string.ascii_lowercase + string.digits
    return Credentials(
        "".join(rng.choices(alphabet, k=rng.randint(3, 16))),
        "".join(rng.choices(alphabet + "-", k=rng.randint(4, 24))),
    )


def test_verdict_matrix():
    """All 9 (module, option) cells behave per their labels over randomized
    inputs, with zero mismatches, in under 60 seconds."""
    rng = random.Random("verdict-matrix")
    started = time.monotonic()
    runs = 0
    for module in ModuleId:
        for option in (1, 2, 3):
            verdict = classify(module, option)
            for _ in range(INPUTS_PER_CELL):
                if module is ModuleId.ASYMMETRIC:
                    student_input = random_credentials(rng)
                else:
                    student_input = random_text(rng)
                trace, returned = run_option(ScenarioSpec(module, option), student_input)
                assert returned == verdict
                assert trace_verdict_consistent(trace, returned), (module, option, student_input)
                runs += 1
    elapsed = time.monotonic() - started
    assert elapsed < 60.0, f"matrix took {elapsed:.1f}s"
    announce("verdict-matrix", f"9 cells x {INPUTS_PER_CELL} inputs, 0 mismatches, {elapsed:.1f}s")


def test_attack_narratives():
    """The three attacked experiences match the canonical stories under the
    default pack."""
    pack = load_content_pack()

    symmetric = pack.modules[ModuleId.SYMMETRIC]
    trace = run_experience(
        ModuleId.SYMMETRIC, True, symmetric.default_message, attacker_text=symmetric.attacker_message
    )
    delivered = trace.first(EventKind.DELIVERED)
    envelope = crypto.decode_envelope(
        crypto.encode_envelope(crypto.make_envelope(symmetric.attacker_message))
    )
    assert symmetric.attacker_message == "I lost my job, can you transfer money to my account."
    assert envelope.body in trace.first(EventKind.ACCEPTED).detail
    assert trace.first(EventKind.MODIFIED) is not None
    assert delivered is not None

    creds = pack.modules[ModuleId.ASYMMETRIC].default_credentials
    asym = run_experience(ModuleId.ASYMMETRIC, True, creds)
    kinds = [e.kind for e in asym.events]
    assert EventKind.KEY_STOLEN in kinds and EventKind.DECRYPTED_BY_ATTACKER in kinds
    assert kinds.index(EventKind.KEY_STOLEN) < kinds.index(EventKind.DECRYPTED_BY_ATTACKER)
    assert asym.outcome is Outcome.COMPROMISED

    hashing = pack.modules[ModuleId.HASHING]
    hash_trace = run_experience(
        ModuleId.HASHING, True, hashing.default_message, attacker_text=hashing.attacker_message
    )
    assert hash_trace.outcome is Outcome.ACCEPTED
    assert hash_trace.has(EventKind.MODIFIED)
    announce(
        "attack-narratives",
        "symmetric swap text verbatim; asymmetric KeyStolen->DecryptedByAttacker; hashing Accepted+Modified",
    )


def test_terminal_ordering():
    """Exactly one permutation completes per module, and the out-of-order
    symmetric encryptMessage feedback is verbatim; all in under 30s."""
    started = time.monotonic()
    expectations = {ModuleId.HASHING: 2, ModuleId.SYMMETRIC: 6, ModuleId.ASYMMETRIC: 120}
    for module, total in expectations.items():
        report = enumerate_orderings(module, seed=0)
        assert report.total == total
        assert len(report.successful) == 1, (module, report.successful)
        assert list(report.successful[0]) == command_names(module)
    session = new_session(ModuleId.SYMMETRIC, seed=0)
    feedback = run_line(session, "encryptMessage")
    assert feedback.status is FeedbackStatus.ORDER_ERROR
    assert feedback.text == (
        "There is no key for encryption. Please generate a key to perform the encryption"
    )
    elapsed = time.monotonic() - started
    assert elapsed < 30.0, f"orderings took {elapsed:.1f}s"
    announce("terminal-ordering", f"1 of 2/6/120 permutations succeed, verbatim feedback, {elapsed:.1f}s")


def test_crypto_round_trips_and_tamper_detection():
    """10^4 symmetric and 10^2 asymmetric round trips succeed; single-bit
    ciphertext flips across one block never reach Accept."""
    rng = random.Random("round-trips")
    key = crypto.generate_sym_key()
    for i in range(SYM_ROUND_TRIPS):
        if i % 1000 == 0:
            key = crypto.generate_sym_key()
        plaintext = rng.randbytes(rng.randint(1, 200))
        assert crypto.sym_decrypt(key, crypto.sym_encrypt(key, plaintext)) == plaintext

    pairs = [crypto.generate_keypair(f"owner-{i}") for i in range(5)]
    for i in range(ASYM_ROUND_TRIPS):
        pair = pairs[i % len(pairs)]
        plaintext = rng.randbytes(rng.randint(1, crypto.OAEP_MAX_PLAINTEXT))
        assert crypto.asym_decrypt(pair.private_key, crypto.asym_encrypt(pair.public_key, plaintext)) == plaintext

    envelope_bytes = crypto.encode_envelope(crypto.make_envelope("I got a promotion"))
    ciphertext = crypto.sym_encrypt(key, envelope_bytes)
    accepts = 0
    for bit in range(128):
        payload = bytearray(ciphertext.payload)
        payload[bit // 8] ^= 1 << (bit % 8)
        try:
            recovered = crypto.sym_decrypt(key, crypto.Ciphertext(iv=ciphertext.iv, payload=bytes(payload)))
            envelope = crypto.decode_envelope(recovered)
        except (crypto.DecryptError, crypto.WireFormatError):
            continue
        if crypto.verify_envelope(envelope) is crypto.VerifyResult.ACCEPT:
            accepts += 1
    assert accepts == 0
    announce(
        "crypto-round-trips",
        f"{SYM_ROUND_TRIPS} symmetric + {ASYM_ROUND_TRIPS} asymmetric round trips, 128 bit-flips, 0 accepts",
    )


def test_readability():
    """Every student-facing pack string grades at or under 8.0, and the two
    worked formula examples reproduce."""
    pack = load_content_pack()
    assert validate_content_pack(pack) == []
    worst = max(
        (readability_grade(text), where) for where, text in pack.student_facing_strings()
    )
    assert worst[0] <= MAX_GRADE, worst

    assert readability_grade("The cat sat on the mat.") == pytest.approx(-1.45, abs=1e-9)
    # The stated derivation for "Go." is 0.39*1 + 11.8*1 - 15.59, which is
    # -3.40; the -11.40 sometimes quoted for it is an arithmetic slip that
    # no tokenization can reach, so the oracle value is pinned instead.
    go_grade = readability_grade("Go.")
    assert go_grade == pytest.approx(0.39 * 1 + 11.8 * 1 - 15.59, abs=1e-9)
    assert go_grade == pytest.approx(-3.40, abs=1e-9)
    announce(
        "readability",
        f"pack worst grade {worst[0]:.2f} <= {MAX_GRADE}; worked examples -1.45 and -3.40 reproduce",
    )


def test_analytics_oracle():
    """paired_t_test tracks scipy within 1e-9 across 1000 random samples;
    the worked t reproduces; quiz scoring matches brute force on 10^4
    random answer vectors."""
    rng = random.Random("analytics")
    worst_t = worst_p = 0.0
    checked = 0
    while checked < T_TEST_SAMPLES:
        n = rng.randint(2, 50)
        pre = [rng.uniform(-100, 100) for _ in range(n)]
        post = [x + rng.uniform(-10, 10) for x in pre]
        try:
            result = paired_t_test(PairedSample.of(pre, post))
        except DegenerateSample:
            continue
        reference_t, reference_p = scipy.stats.ttest_rel(post, pre)
        worst_t = max(worst_t, abs(result.t - reference_t))
        worst_p = max(worst_p, abs(result.p - reference_p))
        checked += 1
    assert worst_t < T_TEST_TOLERANCE and worst_p < T_TEST_TOLERANCE

    worked = paired_t_test(PairedSample.of([1, 2, 3, 4], [2, 4, 3, 6]))
    assert worked.df == 3
    assert round(worked.t, 3) == 2.611

    bank = load_content_pack().modules[ModuleId.HASHING].quiz
    from cipherschool.lessons import Category, score_quiz

    for _ in range(QUIZ_VECTORS):
        answers = [rng.randrange(0, len(q.choices)) for q in bank]
        result = score_quiz(answers, bank)
        hits = [a == q.correct_index for a, q in zip(answers, bank)]
        assert result.overall == 100.0 * sum(hits) / 10
        for category in Category:
            member = [h for h, q in zip(hits, bank) if q.category is category]
            assert result.per_category[category] == 100.0 * sum(member) / len(member)
    announce(
        "analytics-oracle",
        f"t/p within {worst_t:.1e}/{worst_p:.1e} of scipy over {T_TEST_SAMPLES} samples; "
        f"t=2.611 reproduces; {QUIZ_VECTORS} quiz vectors match brute force",
    )


JOURNEY_COMMANDS = {
    "hashing": ["generateHash", "sendMessageHash"],
    "symmetric": ["generateKey", "encryptMessage", "sendEncryptedMessage"],
    "asymmetric": [
        "generateAriaPrivateKey",
        "generateAriaPublicKey",
        "grabServerPublicKey",
        "encryptMessageServerPublicKey",
        "sendEncryptedMessage",
    ],
}


def drive_module(client, headers, module):
    for attacked in (False, True):
        response = client.post(
            "/experience/run", json={"module": module, "attacked": attacked}, headers=headers
        )
        assert response.status_code == 200, response.text
    assert client.post("/coach/start", json={"module": module}, headers=headers).status_code == 200
    for text in ("it was changed", "a key", "keep it secret"):
        response = client.post("/coach/reply", json={"session_id": module, "text": text}, headers=headers)
        assert response.status_code == 200, response.text
    for option in (1, 2, 3):
        response = client.post("/scenario/run", json={"module": module, "option": option}, headers=headers)
        assert response.status_code == 200, response.text
    for line in JOURNEY_COMMANDS[module]:
        response = client.post("/terminal/exec", json={"session_id": module, "line": line}, headers=headers)
        assert response.status_code == 200 and response.json()["status"] == "Ok", response.text
    response = client.post("/quiz/submit", json={"module": module, "answers": [0] * 10}, headers=headers)
    assert response.status_code == 200, response.text


def test_service_lifecycle(tmp_path):
    """Seed accounts and pack, run the full three-module journey through
    the API alone, restart mid-journey, finish with no state loss."""
    from cipherschool.service import Settings, create_app

    accounts = tmp_path / "accounts.yaml"
    accounts.write_text(
        yaml.safe_dump([{"username": "student1", "password": "pw", "display_name": "Student One"}])
    )

    def boot():
        return TestClient(
            create_app(
                Settings(
                    data_dir=tmp_path / "data",
                    accounts_path=accounts,
                    seed=42,
                    use_env_provider=False,
                )
            )
        )

    def sign_in(client):
        response = client.post("/login", json={"username": "student1", "password": "pw"})
        assert response.status_code == 200
        return {"Authorization": f"Bearer {response.json()['token']}"}

    client = boot()
    headers = sign_in(client)
    drive_module(client, headers, "hashing")
    drive_module(client, headers, "symmetric")
    # stop partway into the third module, then restart the service
    for attacked in (False, True):
        client.post("/experience/run", json={"module": "asymmetric", "attacked": attacked}, headers=headers)
    client.post("/coach/start", json={"module": "asymmetric"}, headers=headers)
    client.post("/coach/reply", json={"session_id": "asymmetric", "text": "stolen key"}, headers=headers)

    client = boot()
    headers = sign_in(client)
    progress = client.get("/progress", headers=headers).json()["modules"]
    assert progress["hashing"]["completed_stages"][-1] == "Quiz"
    assert progress["symmetric"]["completed_stages"][-1] == "Quiz"
    assert progress["asymmetric"]["completed_stages"] == ["Experience", "Reflection"]
    for option in (1, 2, 3):
        response = client.post(
            "/scenario/run", json={"module": "asymmetric", "option": option}, headers=headers
        )
        assert response.status_code == 200
    for line in JOURNEY_COMMANDS["asymmetric"]:
        response = client.post(
            "/terminal/exec", json={"session_id": "asymmetric", "line": line}, headers=headers
        )
        assert response.status_code == 200 and response.json()["status"] == "Ok", response.text
    response = client.post("/quiz/submit", json={"module": "asymmetric", "answers": [0] * 10}, headers=headers)
    assert response.status_code == 200
    final = client.get("/progress", headers=headers).json()["modules"]
    assert all(final[m]["completed_stages"][-1] == "Quiz" for m in JOURNEY_COMMANDS)
    announce("service-lifecycle", "3-module journey with a mid-journey restart, no state loss")


def test_coach_failover(tmp_path):
    """Without a provider credential the reflection runs deterministically
    to three exchanges per module; recorded live replies respect the
    sentence cap and question-ending contract."""
    pack = load_content_pack()
    clock = lambda: 0.0  # noqa: E731

    def reflect(module):
        student_input = (
            pack.modules[module].default_credentials
            if module is ModuleId.ASYMMETRIC
            else pack.modules[module].default_message
        )
        trace = run_experience(module, True, student_input, seed=5)
        profile = pack.modules[module].coach
        conversation = start_reflection(module, trace, profile, conversation_id="fixed", clock=clock)
        for text in ("the attacker changed it", "use a key", "keep it safe"):
            reply(conversation, text, profile, provider=None, clock=clock)
        return conversation

    for module in ModuleId:
        first, second = reflect(module), reflect(module)
        assert first.to_records() == second.to_records()
        assert first.source is Source.FALLBACK
        assert first.exchanges == 3
        coach_turns = [t for t in first.turns if t.speaker is Speaker.COACH]
        for turn in coach_turns:
            assert turn.text.rstrip().endswith("?"), turn.text

    # record/replay: a live-path reply obeys the cap and still asks a question
    profile = pack.modules[ModuleId.HASHING].coach

    class Scripted:
        def complete(self, system_prompt, messages):
            return "First point. Second point. Third point. Fourth point. Fifth point."

    fixtures = tmp_path / "fixtures"
    trace = run_experience(ModuleId.HASHING, True, "app essay", seed=5)
    conversation = start_reflection(ModuleId.HASHING, trace, profile, conversation_id="rec", clock=clock)
    reply(conversation, "tell me", profile, provider=RecordingProvider(Scripted(), fixtures), clock=clock)
    recorded_text = conversation.turns[-1].text

    conversation = start_reflection(ModuleId.HASHING, trace, profile, conversation_id="rec", clock=clock)
    reply(conversation, "tell me", profile, provider=ReplayProvider(fixtures), clock=clock)
    replayed_text = conversation.turns[-1].text
    assert replayed_text == recorded_text
    assert conversation.source is Source.LIVE_PROVIDER
    assert len(split_sentences(replayed_text)) <= profile.max_reply_sentences
    assert replayed_text.rstrip().endswith("?")
    announce(
        "coach-failover",
        "3 deterministic fallback exchanges per module; replayed live reply capped and question-terminated",
    )
