"""A complete student journey through the HTTP API: login, both
experiences, reflection chat, the three scenarios, the terminal sequence,
and the quiz. Runs the service in-process against a temp data dir."""

import tempfile
from pathlib import Path

import yaml
from fastapi.testclient import TestClient

from cipherschool.service import Settings, create_app

workdir = Path(tempfile.mkdtemp(prefix="cipherschool-demo-"))
accounts = workdir / "accounts.yaml"
accounts.write_text(yaml.safe_dump([{"username": "demo", "password": "demo-pass"}]))

app = create_app(Settings(data_dir=workdir / "data", accounts_path=accounts, seed=7, use_env_provider=False))
client = TestClient(app)

token = client.post("/login", json={"username": "demo", "password": "demo-pass"}).json()["token"]
auth = {"Authorization": f"Bearer {token}"}
module = "symmetric"

print("experience (ideal, then attacked):")
for attacked in (False, True):
    trace = client.post("/experience/run", json={"module": module, "attacked": attacked}, headers=auth).json()
    print(f"  attacked={attacked}: outcome {trace['trace']['outcome']}, {len(trace['trace']['events'])} events")

print("\nreflection:")
print("  coach:", client.post("/coach/start", json={"module": module}, headers=auth).json()["coach_text"])
for text in ("the hash was replaced too", "encrypt with a key", "both sides share it"):
    answer = client.post("/coach/reply", json={"session_id": module, "text": text}, headers=auth).json()
    print(f"  me: {text}\n  coach: {answer['coach_text']}")

print("\nscenarios:")
for option in (1, 2, 3):
    run = client.post("/scenario/run", json={"module": module, "option": option}, headers=auth).json()
    print(f"  option {option}: {run['verdict']['classification']} - {run['verdict']['reason']}")

print("\nterminal:")
for line in ("encryptMessage", "generateKey", "encryptMessage", "sendEncryptedMessage"):
    feedback = client.post("/terminal/exec", json={"session_id": module, "line": line}, headers=auth).json()
    print(f"  $ {line}\n    [{feedback['status']}] {feedback['text']}")

quiz = client.post("/quiz/submit", json={"module": module, "answers": [0] * 10}, headers=auth).json()
print(f"\nquiz: overall {quiz['overall']}%  by category {quiz['per_category']}")
stages = client.get("/progress", headers=auth).json()["modules"][module]["completed_stages"]
print(f"stages complete: {stages}")
