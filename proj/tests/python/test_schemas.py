import json
from pathlib import Path

import jsonschema
import pytest
from referencing import Registry, Resource

import viasim

SCHEMAS = Path(__file__).resolve().parents[2] / "schemas"


def _registry():
    resources = []
    for path in SCHEMAS.glob("*.schema.json"):
        schema = json.loads(path.read_text())
        resources.append((schema["$id"], Resource.from_contents(schema)))
    return Registry().with_resources(resources)


def _validator(name):
    schema = json.loads((SCHEMAS / name).read_text())
    return jsonschema.Draft202012Validator(schema, registry=_registry())


@pytest.mark.parametrize("name", sorted(p.name for p in SCHEMAS.glob("*.schema.json")))
def test_schemas_are_valid(name):
    jsonschema.Draft202012Validator.check_schema(json.loads((SCHEMAS / name).read_text()))


def test_outcomes_match_schema():
    v = _validator("outcome.schema.json")
    for task in ("precision", "dynamic"):
        rec = viasim.run_trial(overrides={"trial.task": task})
        doc = {"version": viasim.__version__, "task": task, "mode": "H", "operator": "auto",
               "start": 0.0, "target": 0.3, "seed": 0, "failed": rec["failed"], "outcome": rec["outcome"]}
        v.validate(doc)


def test_session_messages_match_schema():
    v = _validator("session.schema.json")
    s = viasim.Session()
    inbound = [
        {"type": "HandleInput", "t": 0.0, "position": 0.0},
        {"type": "SetMode", "t": 0.0, "mode": "A"},
        {"type": "StartTrial", "t": 0.0, "task": "dynamic", "target": 0.1},
        {"type": "Ready", "t": 0.0},
    ]
    out = []
    for msg in inbound:
        v.validate(msg)
        out += s.send(json.dumps(msg))
    for i in range(1, 1500):
        pos = 0.1 * min(i / 300, 1.0) + 0.02
        out += s.send(json.dumps({"type": "HandleInput", "t": i * 1e-3, "position": pos}))
        out += s.advance(1)
    out += s.send("[]")
    kinds = set()
    for text in out:
        msg = json.loads(text)
        v.validate(msg)
        kinds.add(msg["type"])
    assert kinds == {"StateUpdate", "TrialResult", "Error"}


def test_run_directory_matches_schema(tmp_path):
    run = tmp_path / "run"
    viasim.run_experiment(run, overrides={"experiment.participants": 6})
    _validator("manifest.schema.json").validate(json.loads((run / "manifest.json").read_text()))
    _validator("report.schema.json").validate(viasim.analyze(run, overrides={"stats.resamples": 200}))
