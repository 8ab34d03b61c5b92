"""Peter sends his school application across an open network.

Watch the ideal run, watch an attacker quietly rewrite it, then try the
three candidate fixes and see which one actually holds.
"""

from cipherschool import ModuleId, ScenarioSpec, run_experience, run_option

MESSAGE = "I am excited to apply to your school."


def show(trace, title):
    print(f"\n--- {title} ---")
    for event in trace.events:
        preview = f"  | {event.payload_preview}" if event.payload_preview else ""
        print(f"  {event.seq:2d}. [{event.actor.value:>16s}] {event.kind.value:<20s} {event.detail}{preview}")
    print(f"  outcome: {trace.outcome.value}")


print("Peter types:", repr(MESSAGE))

show(run_experience(ModuleId.HASHING, False, MESSAGE, seed=1), "Ideal experience")
show(run_experience(ModuleId.HASHING, True, MESSAGE, seed=1), "Attack experience")

print("\nNothing on the portal's side could tell the fake from the real thing.")
print("Three ways Peter could respond:")

for option in (1, 2, 3):
    trace, verdict = run_option(ScenarioSpec(ModuleId.HASHING, option), MESSAGE, seed=1)
    show(trace, f"Option {option}")
    print(f"  verdict: {verdict.classification.value} - {verdict.reason}")
