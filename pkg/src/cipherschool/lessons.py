"""Lesson orchestration: the fixed stage cycle, quiz scoring, and the
content pack that carries every piece of student-facing material.

The stage cycle never varies: watch the experience, reflect on it, work
the three candidate fixes, implement the secure one in the terminal, then
take the quiz. Packs are plain YAML so teachers can edit them; the
validator holds them to the same bar as the bundled one, including the
readability bound on every student-facing string.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from importlib import resources
from pathlib import Path

import yaml

from . import readability
from .coach import CoachProfile, FallbackBranch, FallbackScript, FallbackStep
from .crypto import Credentials
from .scenarios import ModuleId


class Stage(str, Enum):
    EXPERIENCE = "Experience"
    REFLECTION = "Reflection"
    CONCEPTUALIZATION = "Conceptualization"
    EXPERIMENTATION = "Experimentation"
    QUIZ = "Quiz"


STAGE_ORDER: tuple[Stage, ...] = (
    Stage.EXPERIENCE,
    Stage.REFLECTION,
    Stage.CONCEPTUALIZATION,
    Stage.EXPERIMENTATION,
    Stage.QUIZ,
)


class OutOfOrderStage(Exception):
    def __init__(self, attempted: Stage, expected: Stage | None):
        self.attempted = attempted
        self.expected = expected
        pending = expected.value if expected else "nothing; all stages are complete"
        super().__init__(f"cannot enter {attempted.value}; next up is {pending}")


@dataclass
class LessonProgress:
    """One student's position in one module's stage cycle."""

    student_id: str
    module: ModuleId
    completed_stages: list[Stage] = field(default_factory=list)
    quiz_result: "QuizResult | None" = None
    surveys: dict[str, list[int]] = field(default_factory=dict)

    @property
    def next_stage(self) -> Stage | None:
        done = len(self.completed_stages)
        return STAGE_ORDER[done] if done < len(STAGE_ORDER) else None

    def stage_done(self, stage: Stage) -> bool:
        return stage in self.completed_stages

    def to_records(self) -> dict:
        return {
            "student_id": self.student_id,
            "module": self.module.value,
            "completed_stages": [s.value for s in self.completed_stages],
            "quiz_result": self.quiz_result.to_records() if self.quiz_result else None,
            "surveys": self.surveys,
        }

    @classmethod
    def from_records(cls, records: dict) -> "LessonProgress":
        progress = cls(student_id=records["student_id"], module=ModuleId(records["module"]))
        progress.completed_stages = [Stage(s) for s in records["completed_stages"]]
        if records.get("quiz_result"):
            progress.quiz_result = QuizResult.from_records(records["quiz_result"])
        progress.surveys = {k: list(map(int, v)) for k, v in records.get("surveys", {}).items()}
        return progress


def advance(progress: LessonProgress, stage: Stage) -> LessonProgress:
    """Mark the next stage complete; anything out of order is rejected."""
    if progress.next_stage is not stage:
        raise OutOfOrderStage(stage, progress.next_stage)
    progress.completed_stages.append(stage)
    return progress


# ---------------------------------------------------------------------------
# Quizzes
# ---------------------------------------------------------------------------

class Category(str, Enum):
    CONCEPTUAL = "Conceptual"
    PRACTICAL = "Practical"
    SECURITY = "Security"


REQUIRED_CATEGORY_COUNTS = {Category.CONCEPTUAL: 5, Category.PRACTICAL: 3, Category.SECURITY: 2}
QUIZ_SIZE = 10


class InvalidSubmission(Exception):
    pass


@dataclass(frozen=True)
class QuizQuestion:
    id: str
    text: str
    choices: tuple[str, ...]
    correct_index: int
    category: Category

    def __post_init__(self) -> None:
        if not 2 <= len(self.choices) <= 6:
            raise ValueError(f"question {self.id}: need 2-6 choices")
        if not 0 <= self.correct_index < len(self.choices):
            raise ValueError(f"question {self.id}: correct_index out of range")


@dataclass(frozen=True)
class QuizResult:
    correct: tuple[bool, ...]
    per_category: dict[Category, float]
    overall: float

    def to_records(self) -> dict:
        return {
            "correct": list(self.correct),
            "per_category": {c.value: v for c, v in self.per_category.items()},
            "overall": self.overall,
        }

    @classmethod
    def from_records(cls, records: dict) -> "QuizResult":
        return cls(
            correct=tuple(bool(x) for x in records["correct"]),
            per_category={Category(c): float(v) for c, v in records["per_category"].items()},
            overall=float(records["overall"]),
        )


def score_quiz(answers: list[int], bank: tuple[QuizQuestion, ...]) -> QuizResult:
    """Overall and per-category percentages over the ten-question bank."""
    if len(bank) != QUIZ_SIZE:
        raise InvalidSubmission(f"quiz bank must hold {QUIZ_SIZE} questions")
    if len(answers) != len(bank):
        raise InvalidSubmission(f"expected {len(bank)} answers, got {len(answers)}")
    correct = tuple(int(a) == q.correct_index for a, q in zip(answers, bank))
    per_category: dict[Category, float] = {}
    for category in Category:
        flags = [ok for ok, q in zip(correct, bank) if q.category is category]
        per_category[category] = 100.0 * sum(flags) / len(flags) if flags else 0.0
    return QuizResult(correct=correct, per_category=per_category, overall=100.0 * sum(correct) / len(bank))


# ---------------------------------------------------------------------------
# Content pack
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class VideoRef:
    url: str
    title: str


@dataclass(frozen=True)
class ScenarioNarrative:
    option: int
    label: str
    story: str


@dataclass(frozen=True)
class ModuleContent:
    module: ModuleId
    title: str
    story: str
    video: VideoRef
    concept_video: VideoRef
    default_message: str
    attacker_message: str
    default_credentials: Credentials
    scenarios: dict[int, ScenarioNarrative]
    coach: CoachProfile
    quiz: tuple[QuizQuestion, ...]


@dataclass(frozen=True)
class ContentPack:
    version: int
    max_grade: float
    modules: dict[ModuleId, ModuleContent]

    def student_facing_strings(self) -> list[tuple[str, str]]:
        """Every string a student will read, with where it lives."""
        out: list[tuple[str, str]] = []
        for module_id, content in self.modules.items():
            where = f"modules.{module_id.value}"
            out.append((f"{where}.title", content.title))
            out.append((f"{where}.story", content.story))
            out.append((f"{where}.video.title", content.video.title))
            out.append((f"{where}.concept_video.title", content.concept_video.title))
            for option, narrative in sorted(content.scenarios.items()):
                out.append((f"{where}.scenarios[{option}].label", narrative.label))
                out.append((f"{where}.scenarios[{option}].story", narrative.story))
            coach = content.coach
            opening = coach.opening_question.replace("{detail}", "it").replace("{preview}", "it")
            out.append((f"{where}.coach.system_prompt", coach.system_prompt))
            out.append((f"{where}.coach.opening_question", opening))
            out.append((f"{where}.coach.nudge", coach.nudge))
            out.append((f"{where}.coach.reprompt", coach.fallback.reprompt))
            out.append((f"{where}.coach.closing", coach.fallback.closing))
            for i, step in enumerate(coach.fallback.steps):
                out.append((f"{where}.coach.steps[{i}].default", step.default))
                for j, branch in enumerate(step.branches):
                    out.append((f"{where}.coach.steps[{i}].branches[{j}]", branch.text))
            for question in content.quiz:
                out.append((f"{where}.quiz[{question.id}].text", question.text))
                for k, choice in enumerate(question.choices):
                    out.append((f"{where}.quiz[{question.id}].choices[{k}]", choice))
        return out


@dataclass(frozen=True)
class LessonPlan:
    module: ModuleId
    stages: tuple[Stage, ...]
    content: ModuleContent


def lesson_plan(pack: ContentPack, module: ModuleId) -> LessonPlan:
    return LessonPlan(module=module, stages=STAGE_ORDER, content=pack.modules[module])


class ContentPackError(Exception):
    pass


def _build_coach(module: ModuleId, raw: dict) -> CoachProfile:
    steps = tuple(
        FallbackStep(
            default=str(step["default"]),
            branches=tuple(
                FallbackBranch(patterns=tuple(str(p) for p in branch["patterns"]), text=str(branch["text"]))
                for branch in step.get("branches", [])
            ),
        )
        for step in raw["steps"]
    )
    script = FallbackScript(
        module=module,
        steps=steps,
        reprompt=str(raw["reprompt"]),
        closing=str(raw["closing"]),
    )
    return CoachProfile(
        module=module,
        system_prompt=str(raw["system_prompt"]),
        opening_question=str(raw["opening_question"]),
        nudge=str(raw["nudge"]),
        fallback=script,
        max_reply_sentences=int(raw.get("max_reply_sentences", 4)),
    )


def _build_module(module: ModuleId, raw: dict) -> ModuleContent:
    try:
        quiz = tuple(
            QuizQuestion(
                id=str(q["id"]),
                text=str(q["text"]),
                choices=tuple(str(c) for c in q["choices"]),
                correct_index=int(q["answer"]),
                category=Category(str(q["category"])),
            )
            for q in raw.get("quiz", [])
        )
        scenarios = {
            int(s["option"]): ScenarioNarrative(
                option=int(s["option"]), label=str(s["label"]), story=str(s["story"])
            )
            for s in raw.get("scenarios", [])
        }
        creds_raw = raw.get("default_credentials") or {}
        credentials = (
            Credentials(str(creds_raw["username"]), str(creds_raw["password"]))
            if creds_raw
            else Credentials("student", "change-me")
        )
        return ModuleContent(
            module=module,
            title=str(raw["title"]),
            story=str(raw["story"]),
            video=VideoRef(url=str(raw["video"]["url"]), title=str(raw["video"]["title"])),
            concept_video=VideoRef(
                url=str(raw["concept_video"]["url"]), title=str(raw["concept_video"]["title"])
            ),
            default_message=str(raw.get("default_message", "")),
            attacker_message=str(raw.get("attacker_message", "")),
            default_credentials=credentials,
            scenarios=scenarios,
            coach=_build_coach(module, raw["coach"]),
            quiz=quiz,
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ContentPackError(f"module {module.value}: {exc}") from exc


def load_content_pack(path: str | Path | None = None) -> ContentPack:
    """Load a pack from YAML; with no path, load the bundled default."""
    if path is None:
        text = resources.files("cipherschool").joinpath("content/default_pack.yaml").read_text("utf-8")
    else:
        text = Path(path).read_text("utf-8")
    raw = yaml.safe_load(text)
    if not isinstance(raw, dict) or "modules" not in raw:
        raise ContentPackError("a content pack is a mapping with a 'modules' section")
    modules: dict[ModuleId, ModuleContent] = {}
    for name, module_raw in raw["modules"].items():
        module = ModuleId(name)
        modules[module] = _build_module(module, module_raw or {})
    return ContentPack(
        version=int(raw.get("version", 1)),
        max_grade=float(raw.get("readability_max_grade", readability.DEFAULT_MAX_GRADE)),
        modules=modules,
    )


@dataclass(frozen=True)
class Violation:
    code: str
    location: str
    message: str


def validate_content_pack(pack: ContentPack) -> list[Violation]:
    """Structural and readability checks; an empty list means the pack is
    fit to serve."""
    violations: list[Violation] = []
    for module in ModuleId:
        if module not in pack.modules:
            violations.append(Violation("missing-module", f"modules.{module.value}", "module absent"))
    for module_id, content in pack.modules.items():
        where = f"modules.{module_id.value}"
        counts = {category: 0 for category in Category}
        for question in content.quiz:
            counts[question.category] += 1
        for category, required in REQUIRED_CATEGORY_COUNTS.items():
            if counts[category] != required:
                violations.append(
                    Violation(
                        "quiz-cardinality",
                        f"{where}.quiz",
                        f"{category.value} needs {required} questions, found {counts[category]}",
                    )
                )
        if len(content.quiz) != QUIZ_SIZE:
            violations.append(
                Violation("quiz-size", f"{where}.quiz", f"need {QUIZ_SIZE} questions, found {len(content.quiz)}")
            )
        for option in (1, 2, 3):
            if option not in content.scenarios:
                violations.append(
                    Violation("missing-scenario", f"{where}.scenarios", f"option {option} has no narrative")
                )
        if len(content.coach.fallback.steps) < 3:
            violations.append(
                Violation("coach-depth", f"{where}.coach.steps", "fallback script needs at least 3 exchanges")
            )
        for i, step in enumerate(content.coach.fallback.steps):
            if not step.default.rstrip().endswith("?"):
                violations.append(
                    Violation("coach-question", f"{where}.coach.steps[{i}]", "step must end with a question")
                )
            for j, branch in enumerate(step.branches):
                if not branch.patterns or any(not p.strip() for p in branch.patterns):
                    violations.append(
                        Violation(
                            "coach-unreachable",
                            f"{where}.coach.steps[{i}].branches[{j}]",
                            "branch needs non-empty patterns to be reachable",
                        )
                    )
                if not branch.text.rstrip().endswith("?"):
                    violations.append(
                        Violation(
                            "coach-question",
                            f"{where}.coach.steps[{i}].branches[{j}]",
                            "branch reply must end with a question",
                        )
                    )
        if content.coach.fallback.closing.rstrip().endswith("?"):
            violations.append(
                Violation("coach-closing", f"{where}.coach.closing", "the closing turn must not be a question")
            )
        if module_id in (ModuleId.HASHING, ModuleId.SYMMETRIC):
            if not content.default_message or not content.attacker_message:
                violations.append(
                    Violation("missing-text", where, "module needs default and attacker messages")
                )
    for location, text in pack.student_facing_strings():
        try:
            grade = readability.readability_grade(text)
        except readability.InvalidText:
            violations.append(Violation("empty-text", location, "student-facing string is empty"))
            continue
        if grade > pack.max_grade:
            violations.append(
                Violation(
                    "readability",
                    location,
                    f"grade {grade:.2f} exceeds the {pack.max_grade:.1f} bound",
                )
            )
    return violations
