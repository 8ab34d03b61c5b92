"""The guided terminal, scripted: wrong order first (to show the guidance),
then the correct sequence for each module, ending in the success trace."""

from cipherschool import ModuleId, new_session, run_line
from cipherschool.terminal import command_names

SCRIPTS = {
    ModuleId.HASHING: ["sendMessageHash", "help"],
    ModuleId.SYMMETRIC: ["encryptMessage", "generatekey"],
    ModuleId.ASYMMETRIC: ["sendEncryptedMessage"],
}

for module, missteps in SCRIPTS.items():
    print(f"\n===== {module.value} terminal =====")
    session = new_session(module, seed=0)
    for line in missteps + command_names(module):
        feedback = run_line(session, line)
        print(f"$ {line}")
        print(f"  [{feedback.status.value}] {feedback.text.splitlines()[0]}")
        if feedback.trace is not None:
            print("  success animation:")
            for event in feedback.trace.events:
                print(f"    {event.seq:2d}. [{event.actor.value}] {event.kind.value}: {event.detail}")
