import random
import string

import pytest

from cipherschool.channel import EventKind, Outcome
from cipherschool.crypto import Credentials
from cipherschool.scenarios import (
    DEFAULT_ATTACKER_TEXT,
    ActorKeys,
    Classification,
    InputMismatch,
    ModuleId,
    ScenarioSpec,
    classify,
    run_experience,
    run_option,
    run_option_detailed,
    trace_verdict_consistent,
)

EXPECTED_MATRIX = {
    (ModuleId.HASHING, 1): Classification.INSECURE,
    (ModuleId.HASHING, 2): Classification.INCORRECT,
    (ModuleId.HASHING, 3): Classification.SECURE,
    (ModuleId.SYMMETRIC, 1): Classification.INSECURE,
    (ModuleId.SYMMETRIC, 2): Classification.SECURE,
    (ModuleId.SYMMETRIC, 3): Classification.INCORRECT,
    (ModuleId.ASYMMETRIC, 1): Classification.INSECURE,
    (ModuleId.ASYMMETRIC, 2): Classification.INCORRECT,
    (ModuleId.ASYMMETRIC, 3): Classification.SECURE,
}


def module_input(module: ModuleId, rng: random.Random | None = None):
    if module is ModuleId.ASYMMETRIC:
        if rng is None:
            return Credentials("aria", "sunny-day-42")
        alphabet = string.ascii_lowercase + string.digits
        return Credentials(
            "".join(rng.choices(alphabet, k=rng.randint(3, 12))),
            "".join(rng.choices(alphabet, k=rng.randint(4, 20))),
        )
    if rng is None:
        return "I got a promotion"
    return "".join(rng.choices(string.ascii_letters + " .,!", k=rng.randint(1, 80)))


class TestClassify:
    @pytest.mark.parametrize(("module", "option"), sorted(EXPECTED_MATRIX, key=str))
    def test_matrix(self, module, option):
        assert classify(module, option).classification is EXPECTED_MATRIX[(module, option)]

    def test_bad_option(self):
        with pytest.raises(ValueError):
            classify(ModuleId.HASHING, 4)


class TestRunOption:
    @pytest.mark.parametrize(("module", "option"), sorted(EXPECTED_MATRIX, key=str))
    def test_attacked_cells_consistent(self, module, option):
        rng = random.Random(f"{module.value}-{option}")
        for _ in range(10):
            trace, verdict = run_option(ScenarioSpec(module, option), module_input(module, rng))
            assert verdict.classification is EXPECTED_MATRIX[(module, option)]
            assert trace_verdict_consistent(trace, verdict)

    def test_hashing_option_2_cannot_be_parsed(self):
        trace, _ = run_option(ScenarioSpec(ModuleId.HASHING, 2), "app essay")
        assert trace.outcome is Outcome.PARSE_ERROR
        assert trace.events[-1].kind is EventKind.PARSE_FAILED

    def test_hashing_option_3_detects_and_rejects(self):
        trace, verdict = run_option(ScenarioSpec(ModuleId.HASHING, 3), "app essay")
        kinds = [e.kind for e in trace.events]
        assert EventKind.VERIFY_FAILED in kinds
        assert trace.outcome is Outcome.REJECTED
        assert verdict.classification is Classification.SECURE

    def test_hashing_option_3_unattacked_accepts(self):
        trace, _ = run_option(ScenarioSpec(ModuleId.HASHING, 3, attacked=False), "app essay")
        assert trace.outcome is Outcome.ACCEPTED
        assert trace.has(EventKind.VERIFY_PASSED)

    def test_symmetric_option_3_unreadable_even_without_attack(self):
        for attacked in (True, False):
            trace, _ = run_option(ScenarioSpec(ModuleId.SYMMETRIC, 3, attacked=attacked), "hello")
            assert trace.outcome is Outcome.PARSE_ERROR

    def test_asymmetric_option_2_server_cannot_decrypt(self):
        trace, _ = run_option(ScenarioSpec(ModuleId.ASYMMETRIC, 2), Credentials("aria", "pw"))
        assert trace.outcome is Outcome.PARSE_ERROR

    def test_asymmetric_option_3_attacker_sees_only_noise(self):
        creds = Credentials("aria", "sunny-day-42")
        run = run_option_detailed(ScenarioSpec(ModuleId.ASYMMETRIC, 3), creds)
        assert run.trace.outcome is Outcome.ACCEPTED
        assert run.trace.has(EventKind.INTERCEPTED)
        assert run.attacker_view is not None
        assert b"aria" not in run.attacker_view
        assert b"sunny-day-42" not in run.attacker_view

    def test_symmetric_option_2_attacker_sees_only_noise(self):
        for i in range(25):
            rng = random.Random(i)
            text = module_input(ModuleId.SYMMETRIC, rng)
            run = run_option_detailed(ScenarioSpec(ModuleId.SYMMETRIC, 2), text)
            assert run.attacker_view is not None
            assert text.encode() not in run.attacker_view
            assert run.trace.outcome is Outcome.REJECTED

    def test_wrong_input_type(self):
        with pytest.raises(InputMismatch):
            run_option(ScenarioSpec(ModuleId.ASYMMETRIC, 3), "not credentials")
        with pytest.raises(InputMismatch):
            run_option(ScenarioSpec(ModuleId.HASHING, 1), Credentials("a", "b"))

    def test_seeded_runs_identical(self):
        for module, option in EXPECTED_MATRIX:
            a, _ = run_option(ScenarioSpec(module, option), module_input(module), seed=77)
            b, _ = run_option(ScenarioSpec(module, option), module_input(module), seed=77)
            assert a.to_json() == b.to_json(), (module, option)


class TestRunExperience:
    def test_hashing_ideal_accepted_untouched(self):
        trace = run_experience(ModuleId.HASHING, False, "app essay")
        assert trace.outcome is Outcome.ACCEPTED
        assert not trace.has(EventKind.INTERCEPTED)
        assert not trace.has(EventKind.MODIFIED)

    def test_hashing_attacked_accepted_but_modified(self):
        trace = run_experience(ModuleId.HASHING, True, "app essay")
        assert trace.outcome is Outcome.ACCEPTED
        assert trace.has(EventKind.MODIFIED)

    def test_symmetric_attacked_delivers_the_swindle_text(self):
        trace = run_experience(ModuleId.SYMMETRIC, True, "I got a promotion")
        accepted = trace.first(EventKind.ACCEPTED)
        assert DEFAULT_ATTACKER_TEXT[ModuleId.SYMMETRIC] in accepted.detail
        assert trace.has(EventKind.VERIFY_PASSED)  # the forged hash sails through

    def test_symmetric_ideal_verifies(self):
        trace = run_experience(ModuleId.SYMMETRIC, False, "I got a promotion")
        assert trace.outcome is Outcome.ACCEPTED
        assert trace.has(EventKind.VERIFY_PASSED)
        assert not trace.has(EventKind.INTERCEPTED)

    def test_asymmetric_attacked_is_compromised(self):
        trace = run_experience(ModuleId.ASYMMETRIC, True, Credentials("aria", "pw-123"))
        assert trace.outcome is Outcome.COMPROMISED
        kinds = [e.kind for e in trace.events]
        assert kinds.index(EventKind.KEY_STOLEN) < kinds.index(EventKind.DECRYPTED_BY_ATTACKER)
        assert "aria" in trace.first(EventKind.DECRYPTED_BY_ATTACKER).payload_preview

    def test_asymmetric_ideal_logs_in(self):
        trace = run_experience(ModuleId.ASYMMETRIC, False, Credentials("aria", "pw-123"))
        assert trace.outcome is Outcome.ACCEPTED
        assert not trace.has(EventKind.INTERCEPTED)

    @pytest.mark.parametrize("module", list(ModuleId))
    def test_ideal_never_shows_the_attacker(self, module):
        trace = run_experience(module, False, module_input(module))
        assert not trace.has(EventKind.INTERCEPTED)
        assert not trace.has(EventKind.MODIFIED)
        assert not trace.has(EventKind.KEY_STOLEN)


class TestActorKeys:
    def test_same_seed_same_keys(self):
        assert ActorKeys.for_seed(3) is ActorKeys.for_seed(3)
        a = ActorKeys.for_seed(3)
        assert a.chat_key == a.chat_key

    def test_different_seeds_different_keys(self):
        assert ActorKeys.for_seed(1).chat_key != ActorKeys.for_seed(2).chat_key
