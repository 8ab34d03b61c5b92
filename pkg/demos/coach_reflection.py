"""Offline reflection chat: the scripted coach walks a student through what
they just watched. Runs with no provider configured, fully deterministic."""

from cipherschool import ModuleId, run_experience
from cipherschool.coach import reply, start_reflection
from cipherschool.lessons import load_content_pack

pack = load_content_pack()
module = ModuleId.SYMMETRIC
profile = pack.modules[module].coach

trace = run_experience(module, True, pack.modules[module].default_message, seed=4)
conversation = start_reflection(module, trace, profile)

student_lines = [
    "the attacker changed the message and the hash",
    "maybe encrypt it with a key?",
    "they both need the same key",
    "ready!",
]

print(f"Coach: {conversation.turns[-1].text}")
for line in student_lines:
    reply(conversation, line, profile, provider=None)
    print(f"\nStudent: {line}")
    print(f"Coach: {conversation.turns[-1].text}")

print(f"\n(source: {conversation.source.value}, closed: {conversation.closed})")
