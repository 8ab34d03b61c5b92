"""Mary chats with Sita about her promotion; an attacker rewrites both the
message and its hash, and the chat believes the fake.

The fix on display: encrypt the message-plus-hash under a shared key, and
watch a tampered ciphertext get caught.
"""

from cipherschool import ModuleId, ScenarioSpec, run_experience, run_option

MESSAGE = "I got a promotion"


def show(trace, title):
    print(f"\n--- {title} ---")
    for event in trace.events:
        preview = f"  | {event.payload_preview}" if event.payload_preview else ""
        print(f"  {event.seq:2d}. [{event.actor.value:>16s}] {event.kind.value:<20s} {event.detail}{preview}")
    print(f"  outcome: {trace.outcome.value}")


print("Mary types:", repr(MESSAGE))

show(run_experience(ModuleId.SYMMETRIC, False, MESSAGE, seed=2), "Ideal experience")
show(run_experience(ModuleId.SYMMETRIC, True, MESSAGE, seed=2), "Attack experience")

print("\nA hash alone cannot help once the attacker replaces both parts.")

for option in (1, 2, 3):
    trace, verdict = run_option(ScenarioSpec(ModuleId.SYMMETRIC, option), MESSAGE, seed=2)
    show(trace, f"Option {option}")
    print(f"  verdict: {verdict.classification.value} - {verdict.reason}")
