import pytest

from cipherschool.coach import (
    Conversation,
    ProviderError,
    ProviderTimeout,
    RecordingProvider,
    ReplayProvider,
    Source,
    Speaker,
    provider_from_env,
    reply,
    split_sentences,
    start_reflection,
    trim_reply,
)
from cipherschool.crypto import Credentials
from cipherschool.scenarios import ModuleId, run_experience

CLOCK = lambda: 1000.0  # noqa: E731 - fixed clock keeps conversations comparable


@pytest.fixture()
def profiles(pack):
    return {module: content.coach for module, content in pack.modules.items()}


def attacked_trace(module):
    student_input = Credentials("aria", "pw-1") if module is ModuleId.ASYMMETRIC else "I got a promotion"
    return run_experience(module, True, student_input, seed=2)


def ideal_trace(module):
    student_input = Credentials("aria", "pw-1") if module is ModuleId.ASYMMETRIC else "I got a promotion"
    return run_experience(module, False, student_input, seed=2)


class TestStartReflection:
    @pytest.mark.parametrize("module", list(ModuleId))
    def test_opening_references_the_attack(self, module, profiles):
        trace = attacked_trace(module)
        conversation = start_reflection(module, trace, profiles[module], clock=CLOCK)
        assert conversation.turns[0].speaker is Speaker.COACH
        opening = conversation.turns[0].text
        attack_events = [e for e in trace.events if e.kind.value in ("Modified", "KeyStolen")]
        assert attack_events[0].detail in opening
        assert opening.rstrip().endswith("?")

    @pytest.mark.parametrize("module", list(ModuleId))
    def test_ideal_trace_refused(self, module, profiles):
        with pytest.raises(ValueError):
            start_reflection(module, ideal_trace(module), profiles[module], clock=CLOCK)

    def test_profile_module_must_match(self, profiles):
        with pytest.raises(ValueError):
            start_reflection(ModuleId.HASHING, attacked_trace(ModuleId.HASHING), profiles[ModuleId.SYMMETRIC])


def run_scripted(module, profile, lines, provider=None):
    conversation = start_reflection(module, attacked_trace(module), profile, conversation_id="c", clock=CLOCK)
    for line in lines:
        reply(conversation, line, profile, provider=provider, clock=CLOCK)
    return conversation


class TestFallback:
    @pytest.mark.parametrize("module", list(ModuleId))
    def test_three_exchanges_deterministic(self, module, profiles):
        lines = ["the message was changed", "use a key", "both sides need it"]
        a = run_scripted(module, profiles[module], lines)
        b = run_scripted(module, profiles[module], lines)
        assert a.to_records() == b.to_records()
        assert a.source is Source.FALLBACK
        assert a.exchanges == 3

    @pytest.mark.parametrize("module", list(ModuleId))
    def test_coach_turns_end_with_questions_until_closing(self, module, profiles):
        lines = ["one", "two", "three", "four"]
        conversation = run_scripted(module, profiles[module], lines)
        coach_turns = [t for t in conversation.turns if t.speaker is Speaker.COACH]
        for turn in coach_turns[:-1]:
            assert turn.text.rstrip().endswith("?"), turn.text
        assert not coach_turns[-1].text.rstrip().endswith("?")
        assert conversation.closed

    def test_strict_alternation_starting_with_coach(self, profiles):
        conversation = run_scripted(ModuleId.HASHING, profiles[ModuleId.HASHING], ["a", "b"])
        speakers = [t.speaker for t in conversation.turns]
        assert speakers[0] is Speaker.COACH
        assert all(speakers[i] != speakers[i + 1] for i in range(len(speakers) - 1))

    def test_keyword_branch_is_taken(self, profiles):
        profile = profiles[ModuleId.HASHING]
        branch = profile.fallback.steps[0].branches[0]
        conversation = run_scripted(ModuleId.HASHING, profile, [f"maybe a {branch.patterns[0]}?"])
        assert conversation.turns[-1].text == branch.text

    def test_empty_student_text_reprompts_without_consuming_a_step(self, profiles):
        profile = profiles[ModuleId.SYMMETRIC]
        conversation = start_reflection(ModuleId.SYMMETRIC, attacked_trace(ModuleId.SYMMETRIC), profile, clock=CLOCK)
        reply(conversation, "   ", profile, clock=CLOCK)
        assert conversation.turns[-1].text == profile.fallback.reprompt
        assert conversation.exchanges == 0
        reply(conversation, "a real answer", profile, clock=CLOCK)
        assert conversation.exchanges == 1

    def test_closed_conversation_refuses_more(self, profiles):
        profile = profiles[ModuleId.HASHING]
        conversation = run_scripted(ModuleId.HASHING, profile, ["a", "b", "c", "d"])
        assert conversation.closed
        with pytest.raises(ValueError):
            reply(conversation, "hello again", profile, clock=CLOCK)

    def test_serialization_round_trip(self, profiles):
        conversation = run_scripted(ModuleId.SYMMETRIC, profiles[ModuleId.SYMMETRIC], ["x"])
        assert Conversation.from_records(conversation.to_records()).to_records() == conversation.to_records()


class StubProvider:
    def __init__(self, responses):
        self.responses = list(responses)
        self.calls = 0

    def complete(self, system_prompt, messages):
        self.calls += 1
        response = self.responses.pop(0)
        if isinstance(response, Exception):
            raise response
        return response


class TestProviderPath:
    def test_healthy_provider_is_used_and_trimmed(self, profiles):
        profile = profiles[ModuleId.HASHING]
        stub = StubProvider(["Short answer. What changed in the text?"])
        conversation = run_scripted(ModuleId.HASHING, profile, ["the text changed"], provider=stub)
        assert conversation.source is Source.LIVE_PROVIDER
        assert conversation.turns[-1].text == "Short answer. What changed in the text?"

    def test_overlong_reply_hits_the_sentence_cap(self, profiles):
        profile = profiles[ModuleId.HASHING]
        sprawling = "One. Two. Three. Four. Five. Six. Do you see?"
        stub = StubProvider([sprawling])
        conversation = run_scripted(ModuleId.HASHING, profile, ["hm"], provider=stub)
        text = conversation.turns[-1].text
        assert len(split_sentences(text)) <= profile.max_reply_sentences
        assert text.rstrip().endswith("?")

    def test_provider_failure_switches_to_fallback(self, profiles):
        profile = profiles[ModuleId.SYMMETRIC]
        stub = StubProvider([ProviderTimeout("slow"), ProviderError("boom")])
        conversation = run_scripted(ModuleId.SYMMETRIC, profile, ["a", "b"], provider=stub)
        assert conversation.source is Source.FALLBACK
        assert conversation.turns[-1].text == profile.fallback.steps[1].pick("b")

    def test_record_then_replay(self, tmp_path, profiles):
        profile = profiles[ModuleId.ASYMMETRIC]
        canned = "Key pairs split the lock from the key. Which key stays home?"
        recorder = RecordingProvider(StubProvider([canned]), tmp_path)
        recorded = run_scripted(ModuleId.ASYMMETRIC, profile, ["keys?"], provider=recorder)
        assert recorded.turns[-1].text == canned
        replayer = ReplayProvider(tmp_path)
        replayed = run_scripted(ModuleId.ASYMMETRIC, profile, ["keys?"], provider=replayer)
        assert replayed.source is Source.LIVE_PROVIDER
        assert replayed.turns[-1].text == canned

    def test_replay_miss_is_a_provider_error(self, tmp_path):
        with pytest.raises(ProviderError):
            ReplayProvider(tmp_path).complete("sys", [{"role": "user", "content": "?"}])


class TestProviderConfig:
    def test_unconfigured_environment_means_no_provider(self):
        assert provider_from_env({}) is None

    def test_endpoint_without_credential_means_no_provider(self):
        assert provider_from_env({"CIPHERSCHOOL_COACH_ENDPOINT": "http://example.invalid"}) is None

    def test_fixture_directory_wins(self, tmp_path):
        provider = provider_from_env(
            {
                "CIPHERSCHOOL_COACH_FIXTURES": str(tmp_path),
                "CIPHERSCHOOL_COACH_ENDPOINT": "http://example.invalid",
                "CIPHERSCHOOL_COACH_API_KEY": "k",
            }
        )
        assert isinstance(provider, ReplayProvider)

    def test_live_provider_built_from_env(self):
        provider = provider_from_env(
            {
                "CIPHERSCHOOL_COACH_ENDPOINT": "http://example.invalid/v1/chat",
                "CIPHERSCHOOL_COACH_API_KEY": "secret",
                "CIPHERSCHOOL_COACH_MODEL": "tutor-1",
            }
        )
        assert provider is not None and provider.model == "tutor-1"


class TestTrimReply:
    def test_short_reply_untouched(self):
        assert trim_reply("Why is that?", 4, "And then?") == "Why is that?"

    def test_statement_gets_a_nudge(self):
        trimmed = trim_reply("Hashes are codes.", 4, "What else?")
        assert trimmed == "Hashes are codes. What else?"

    def test_empty_reply_becomes_the_nudge(self):
        assert trim_reply("", 4, "What else?") == "What else?"
