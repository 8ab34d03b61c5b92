"""Stage ordering and quiz scoring: walk the lesson cycle in order (and get
told off for skipping ahead), then score a quiz by category."""

from cipherschool.lessons import (
    STAGE_ORDER,
    LessonProgress,
    OutOfOrderStage,
    Stage,
    advance,
    load_content_pack,
    score_quiz,
)
from cipherschool.scenarios import ModuleId

progress = LessonProgress("demo-student", ModuleId.HASHING)

print("Trying to jump straight to the quiz:")
try:
    advance(progress, Stage.QUIZ)
except OutOfOrderStage as exc:
    print(f"  refused: {exc}")

print("\nWalking the cycle in order:")
for stage in STAGE_ORDER:
    advance(progress, stage)
    print(f"  completed {stage.value}")

bank = load_content_pack().modules[ModuleId.HASHING].quiz
answers = [q.correct_index for q in bank]
answers[3] = (answers[3] + 1) % len(bank[3].choices)  # miss one conceptual question
result = score_quiz(answers, bank)

print("\nQuiz result:")
for category, score in result.per_category.items():
    print(f"  {category.value:<12s} {score:5.1f}%")
print(f"  overall      {result.overall:5.1f}%")
