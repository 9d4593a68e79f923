import json

import numpy as np
import pytest

from vqekit.io import Clip, write_clip
from vqekit.rand import seeded_rng
from vqekit.rank import votes_to_counts
from vqekit.study import (
    Condition,
    DuplicateVote,
    Exhausted,
    MalformedVote,
    NotAssigned,
    Study,
    StudyConfig,
    UnknownPair,
)
from vqekit.validation import ValidationError


@pytest.fixture
def study_dirs(tmp_path):
    """Two clips x three conditions, 2 tiny frames each."""
    rng = seeded_rng(0)
    roots = {}
    for method in ("input", "m1", "m2"):
        root = tmp_path / method
        for clip_id in ("c0", "c1"):
            clip = Clip(rng.uniform(0, 1, (2, 4, 4, 3)), clip_id=clip_id)
            write_clip(clip, root / clip_id)
        roots[method] = str(root)
    return tmp_path, roots


def _config(tmp_path, roots, votes_per_pair=2, reference=()):  # helper
    conds = [Condition(method_id=m, root=r, reference=(m in reference))
             for m, r in sorted(roots.items())]
    return StudyConfig(conditions=conds, votes_per_pair=votes_per_pair,
                       data_dir=str(tmp_path / "state"))


def _vote_body(assignment, rater_id, rating=2):
    return {
        "rater_id": rater_id,
        "pair_id": assignment["pair_id"],
        "left_id": assignment["left_method"],
        "right_id": assignment["right_method"],
        "rating": rating,
    }


def test_pair_enumeration(study_dirs):
    tmp_path, roots = study_dirs
    study = Study(_config(tmp_path, roots))
    # 2 clips x C(3,2) condition pairs
    assert len(study.pairs) == 6
    study.close()


def test_reference_pairs_excluded(study_dirs):
    tmp_path, roots = study_dirs
    study = Study(_config(tmp_path, roots, reference=("input", "m1")))
    # input x m1 dropped per clip
    assert len(study.pairs) == 4
    study.close()


def test_next_pair_idempotent_until_vote(study_dirs):
    tmp_path, roots = study_dirs
    study = Study(_config(tmp_path, roots))
    a1 = study.next_pair("r1")
    a2 = study.next_pair("r1")
    assert a1["pair_id"] == a2["pair_id"]
    assert a1["left_method"] == a2["left_method"]
    study.submit_vote(_vote_body(a1, "r1"))
    a3 = study.next_pair("r1")
    assert a3["pair_id"] != a1["pair_id"]
    study.close()


def test_assignment_payload_media(study_dirs):
    tmp_path, roots = study_dirs
    study = Study(_config(tmp_path, roots))
    a = study.next_pair("r1")
    for side in ("left", "right"):
        info = a[side]
        assert info["frame_count"] == 2
        assert info["fps"] == 30.0
        assert info["urls"][0].startswith(f"/media/{a['clip_id']}/")
    study.close()


def test_vote_validation(study_dirs):
    tmp_path, roots = study_dirs
    study = Study(_config(tmp_path, roots))
    a = study.next_pair("r1")
    with pytest.raises(MalformedVote, match="missing"):
        study.submit_vote({"rater_id": "r1", "pair_id": a["pair_id"]})
    with pytest.raises(MalformedVote, match="rating"):
        study.submit_vote({"rater_id": "r1", "pair_id": a["pair_id"], "rating": 9})
    with pytest.raises(MalformedVote, match="integer"):
        study.submit_vote({"rater_id": "r1", "pair_id": a["pair_id"], "rating": "x"})
    with pytest.raises(MalformedVote, match="factor"):
        study.submit_vote({"rater_id": "r1", "pair_id": a["pair_id"],
                           "rating": 3, "factor": "speed"})
    with pytest.raises(UnknownPair):
        study.submit_vote({"rater_id": "r1", "pair_id": "nope", "rating": 3})
    bad = _vote_body(a, "r1")
    bad["left_id"], bad["right_id"] = bad["right_id"], bad["left_id"]
    with pytest.raises(MalformedVote, match="orientation"):
        study.submit_vote(bad)
    study.close()


def test_duplicate_and_not_assigned(study_dirs):
    tmp_path, roots = study_dirs
    study = Study(_config(tmp_path, roots))
    a = study.next_pair("r1")
    with pytest.raises(NotAssigned):
        study.submit_vote(_vote_body(a, "r2"))
    study.submit_vote(_vote_body(a, "r1"))
    with pytest.raises(DuplicateVote):
        study.submit_vote(_vote_body(a, "r1"))
    study.close()


def test_exhausted_when_rater_saw_everything(study_dirs):
    tmp_path, roots = study_dirs
    study = Study(_config(tmp_path, roots, votes_per_pair=1))
    for _ in range(len(study.pairs)):
        a = study.next_pair("r1")
        study.submit_vote(_vote_body(a, "r1"))
    with pytest.raises(Exhausted):
        study.next_pair("r1")
    # a different rater is also done: every pair hit its vote target
    with pytest.raises(Exhausted):
        study.next_pair("r2")
    study.close()


def test_least_completed_scheduling(study_dirs):
    tmp_path, roots = study_dirs
    study = Study(_config(tmp_path, roots, votes_per_pair=2))
    seen = []
    for r in range(len(study.pairs)):
        a = study.next_pair(f"rater{r}")
        seen.append(a["pair_id"])
        study.submit_vote(_vote_body(a, f"rater{r}"))
    # every pair served once before any repeats
    assert len(set(seen)) == len(study.pairs)
    study.close()


def test_orientation_counterbalanced(study_dirs):
    tmp_path, roots = study_dirs
    study = Study(_config(tmp_path, roots, votes_per_pair=4))
    orientations = {}
    for r in range(4 * len(study.pairs)):
        rid = f"rater{r}"
        a = study.next_pair(rid)
        orientations.setdefault(a["pair_id"], []).append(a["left_method"])
        study.submit_vote(_vote_body(a, rid))
    for pid, lefts in orientations.items():
        st = study.pairs[pid]
        counts = {st.method_a: 0, st.method_b: 0}
        for l in lefts:
            counts[l] += 1
        assert abs(counts[st.method_a] - counts[st.method_b]) <= 1, pid
    study.close()


def test_restart_replays_log(study_dirs):
    tmp_path, roots = study_dirs
    cfg = _config(tmp_path, roots, votes_per_pair=2)
    study = Study(cfg)
    a = study.next_pair("r1")
    study.submit_vote(_vote_body(a, "r1", rating=5))
    b = study.next_pair("r2")
    study.submit_vote(_vote_body(b, "r2", rating=3))
    study.close()

    again = Study(_config(tmp_path, roots, votes_per_pair=2))
    assert len(again.votes) == 2
    assert again.pairs[a["pair_id"]].completed_count >= 1
    # the same raters cannot revote
    with pytest.raises(DuplicateVote):
        c = again.next_pair("r1")
        body = _vote_body(c, "r1")
        body["pair_id"] = a["pair_id"]
        body["left_id"] = a["left_method"]
        body["right_id"] = a["right_method"]
        again.submit_vote(body)
    again.close()


def test_restart_resumes_orientation_balance(study_dirs):
    tmp_path, roots = study_dirs
    study = Study(_config(tmp_path, roots, votes_per_pair=4))
    a = study.next_pair("r1")
    first_left = a["left_method"]
    study.submit_vote(_vote_body(a, "r1"))
    study.close()

    again = Study(_config(tmp_path, roots, votes_per_pair=4))
    st = again.pairs[a["pair_id"]]
    assert st.a_left_serves + st.b_left_serves == 1
    # next serve of that pair flips sides
    for r in range(2, 20):
        b = again.next_pair(f"r{r}")
        if b["pair_id"] == a["pair_id"]:
            assert b["left_method"] != first_left
            break
        again.submit_vote(_vote_body(b, f"r{r}"))
    again.close()


def test_export_matches_counts(study_dirs):
    tmp_path, roots = study_dirs
    study = Study(_config(tmp_path, roots))
    ratings = [1, 3, 5, 2]
    for i, rating in enumerate(ratings):
        a = study.next_pair(f"rater{i}")
        study.submit_vote(_vote_body(a, f"rater{i}", rating=rating))
    text = study.export_votes()
    lines = [l for l in text.splitlines() if l.strip()]
    assert len(lines) == 4
    from vqekit.rank import VoteRecord
    votes = [VoteRecord.from_dict(json.loads(l)) for l in lines]
    counts = votes_to_counts(votes)
    total = sum(counts.wins(x, y) + counts.wins(y, x) + counts.ties(x, y)
                for x, y in counts.pairs())
    assert total == 4.0
    study.close()


def test_progress_reporting(study_dirs):
    tmp_path, roots = study_dirs
    study = Study(_config(tmp_path, roots, votes_per_pair=1))
    p = study.progress()
    assert p["pairs_total"] == 6
    assert p["votes_total"] == 0
    assert not p["complete"]
    for r in range(6):
        a = study.next_pair(f"r{r}")
        study.submit_vote(_vote_body(a, f"r{r}"))
    p = study.progress()
    assert p["votes_total"] == 6
    assert p["complete"]
    study.close()


def test_media_path_guarded(study_dirs):
    tmp_path, roots = study_dirs
    study = Study(_config(tmp_path, roots))
    path = study.media_path("c0", "m1", "frame_000000.ppm")
    assert path.endswith("frame_000000.ppm")
    with pytest.raises(UnknownPair):
        study.media_path("c0", "m1", "../../secret")
    with pytest.raises(UnknownPair):
        study.media_path("c0", "m1", "frame_000099.ppm")
    with pytest.raises(UnknownPair):
        study.media_path("c0", "nope", "frame_000000.ppm")
    study.close()


def test_config_validation(tmp_path):
    with pytest.raises(ValidationError, match="unique"):
        StudyConfig(conditions=[Condition("a", "x"), Condition("a", "y")])
    with pytest.raises(ValidationError, match="two conditions"):
        StudyConfig(conditions=[Condition("a", "x")])
    with pytest.raises(ValidationError, match="votes_per_pair"):
        StudyConfig(conditions=[Condition("a", "x"), Condition("b", "y")],
                    votes_per_pair=0)


def test_config_json_roundtrip(tmp_path):
    p = tmp_path / "study.json"
    p.write_text(json.dumps({
        "conditions": [
            {"method_id": "a", "root": "ra", "reference": True},
            {"method_id": "b", "root": "rb"},
        ],
        "votes_per_pair": 5,
        "fps": 24.0,
        "data_dir": str(tmp_path / "st"),
        "clips": ["c0"],
    }))
    cfg = StudyConfig.from_json_file(p)
    assert cfg.conditions[0].reference
    assert cfg.votes_per_pair == 5
    assert cfg.fps == 24.0
    assert cfg.clips == ["c0"]


def test_no_clips_raises(tmp_path):
    cfg = StudyConfig(
        conditions=[Condition("a", str(tmp_path / "none_a")),
                    Condition("b", str(tmp_path / "none_b"))],
        data_dir=str(tmp_path / "state"))
    with pytest.raises(ValidationError, match="no clips"):
        Study(cfg)
