"""Aria logs in over free wifi. The shared key crosses the open channel,
gets stolen, and her credentials are read in flight.

The fix on display: key pairs. Lock the login with the server's public
key; the private key never travels, so there is nothing to steal.
"""

from cipherschool import Credentials, ModuleId, ScenarioSpec, run_experience, run_option

CREDS = Credentials("aria", "sunny-day-42")


def show(trace, title):
    print(f"\n--- {title} ---")
    for event in trace.events:
        preview = f"  | {event.payload_preview}" if event.payload_preview else ""
        print(f"  {event.seq:2d}. [{event.actor.value:>16s}] {event.kind.value:<20s} {event.detail}{preview}")
    print(f"  outcome: {trace.outcome.value}")


print(f"Aria logs in as {CREDS.username!r}")

show(run_experience(ModuleId.ASYMMETRIC, False, CREDS, seed=3), "Ideal experience (shared key)")
show(run_experience(ModuleId.ASYMMETRIC, True, CREDS, seed=3), "Attack experience (key theft)")

print("\nPre-sharing a secret over the same wire you are trying to protect is the flaw.")

for option in (1, 2, 3):
    trace, verdict = run_option(ScenarioSpec(ModuleId.ASYMMETRIC, option), CREDS, seed=3)
    show(trace, f"Option {option}")
    print(f"  verdict: {verdict.classification.value} - {verdict.reason}")
