import json

import pytest
from fastapi.testclient import TestClient

from vqekit.io import Clip, write_clip
from vqekit.rand import seeded_rng
from vqekit.study import Condition, Study, StudyConfig, create_app


@pytest.fixture
def client(tmp_path):
    rng = seeded_rng(0)
    roots = {}
    for method in ("m1", "m2"):
        root = tmp_path / method
        for clip_id in ("c0",):
            write_clip(Clip(rng.uniform(0, 1, (2, 4, 4, 3))), root / clip_id)
        roots[method] = str(root)
    cfg = StudyConfig(
        conditions=[Condition("m1", roots["m1"]), Condition("m2", roots["m2"])],
        votes_per_pair=2,
        data_dir=str(tmp_path / "state"),
    )
    study = Study(cfg)
    ui = tmp_path / "ui"
    ui.mkdir()
    (ui / "index.html").write_text("<html><body>rater</body></html>")
    app = create_app(study, ui_dir=str(ui))
    with TestClient(app) as c:
        yield c
    study.close()


def test_pair_and_vote_flow(client):
    r = client.get("/api/pair", params={"rater_id": "r1"})
    assert r.status_code == 200
    a = r.json()
    assert {"pair_id", "left_method", "right_method", "left", "right"} <= set(a)

    v = client.post("/api/vote", json={
        "rater_id": "r1", "pair_id": a["pair_id"],
        "left_id": a["left_method"], "right_id": a["right_method"],
        "rating": 4,
    })
    assert v.status_code == 201
    assert v.json()["code"] == "ok"

    p = client.get("/api/progress").json()
    assert p["votes_total"] == 1


def test_error_codes(client):
    # malformed: missing rater
    r = client.get("/api/pair")
    assert r.status_code == 400
    assert r.json()["code"] == "malformed_vote"

    a = client.get("/api/pair", params={"rater_id": "r1"}).json()
    # vote on an unknown pair
    r = client.post("/api/vote", json={"rater_id": "r1", "pair_id": "zz", "rating": 3})
    assert r.status_code == 404
    assert r.json()["code"] == "unknown_pair"
    # not assigned to this rater
    r = client.post("/api/vote", json={"rater_id": "r9", "pair_id": a["pair_id"],
                                       "rating": 3})
    assert r.status_code == 409
    assert r.json()["code"] == "not_assigned"
    # duplicate
    ok = client.post("/api/vote", json={"rater_id": "r1", "pair_id": a["pair_id"],
                                        "rating": 3})
    assert ok.status_code == 201
    dup = client.post("/api/vote", json={"rater_id": "r1", "pair_id": a["pair_id"],
                                         "rating": 3})
    assert dup.status_code == 409
    assert dup.json()["code"] == "duplicate_vote"
    # malformed rating, from a rater who still holds an assignment
    b = client.get("/api/pair", params={"rater_id": "r2"}).json()
    bad = client.post("/api/vote", json={"rater_id": "r2", "pair_id": b["pair_id"],
                                         "rating": 7})
    assert bad.status_code == 400
    assert bad.json()["code"] == "malformed_vote"
    # non-object body
    r = client.post("/api/vote", json=[1, 2])
    assert r.status_code == 400


def test_exhausted_status(client):
    for i in range(2):
        a = client.get("/api/pair", params={"rater_id": f"r{i}"}).json()
        client.post("/api/vote", json={"rater_id": f"r{i}", "pair_id": a["pair_id"],
                                       "rating": 2})
    r = client.get("/api/pair", params={"rater_id": "r9"})
    assert r.status_code == 410
    assert r.json()["code"] == "exhausted"


def test_media_served(client):
    a = client.get("/api/pair", params={"rater_id": "r1"}).json()
    url = a["left"]["urls"][0]
    r = client.get(url)
    assert r.status_code == 200
    assert r.content.startswith(b"P6")
    missing = client.get(url.replace("frame_000000", "frame_000042"))
    assert missing.status_code == 404


def test_export_is_jsonl(client):
    a = client.get("/api/pair", params={"rater_id": "r1"}).json()
    client.post("/api/vote", json={"rater_id": "r1", "pair_id": a["pair_id"],
                                   "rating": 5})
    r = client.get("/api/export")
    assert r.status_code == 200
    lines = [l for l in r.text.splitlines() if l.strip()]
    assert len(lines) == 1
    rec = json.loads(lines[0])
    assert rec["rating"] == 5
    assert rec["pair_id"] == a["pair_id"]


def test_static_ui_mounted(client):
    r = client.get("/")
    assert r.status_code == 200
    assert "rater" in r.text
