"""Study state: pair scheduling, vote log, counters.

All mutation funnels through one lock. Votes persist to a single append-only
JSONL file with fsync per record; every counter (completion, orientation
balance) is reconstructed from that file on restart, so the log is the only
state that matters.
"""

from __future__ import annotations

import json
import os
import re
import threading
from dataclasses import dataclass, field

from ..rank import FACTORS, VoteRecord
from ..validation import ValidationError


class StudyError(Exception):
    code = "error"
    status = 400


class UnknownPair(StudyError):
    code = "unknown_pair"
    status = 404


class DuplicateVote(StudyError):
    code = "duplicate_vote"
    status = 409


class NotAssigned(StudyError):
    code = "not_assigned"
    status = 409


class MalformedVote(StudyError):
    code = "malformed_vote"
    status = 400


class Exhausted(StudyError):
    code = "exhausted"
    status = 410


@dataclass
class Condition:
    method_id: str
    root: str
    reference: bool = False  # reference conditions (input/baseline) are not paired together


@dataclass
class PairState:
    pair_id: str
    clip_id: str
    method_a: str  # canonical order, a < b
    method_b: str
    served_count: int = 0
    completed_count: int = 0
    a_left_serves: int = 0
    b_left_serves: int = 0


@dataclass
class StudyConfig:
    conditions: list
    votes_per_pair: int = 3
    fps: float = 30.0
    data_dir: str = "study_data"
    clips: list = field(default_factory=list)

    def __post_init__(self):
        self.conditions = [c if isinstance(c, Condition) else Condition(**c)
                           for c in self.conditions]
        ids = [c.method_id for c in self.conditions]
        if len(set(ids)) != len(ids):
            raise ValidationError("condition method_ids must be unique")
        if len(ids) < 2:
            raise ValidationError("need at least two conditions")
        if self.votes_per_pair < 1:
            raise ValidationError("votes_per_pair must be >= 1")
        if not (self.fps > 0):
            raise ValidationError("fps must be positive")

    @staticmethod
    def from_json_file(path) -> "StudyConfig":
        with open(path, encoding="utf-8") as f:
            data = json.load(f)
        return StudyConfig(
            conditions=data["conditions"],
            votes_per_pair=int(data.get("votes_per_pair", 3)),
            fps=float(data.get("fps", 30.0)),
            data_dir=str(data.get("data_dir", "study_data")),
            clips=list(data.get("clips", [])),
        )


_FRAME_RE = re.compile(r"^frame_(\d{6})\.ppm$")


def list_frames(dirpath) -> list:
    if not os.path.isdir(dirpath):
        return []
    out = [n for n in os.listdir(dirpath) if _FRAME_RE.match(n)]
    return sorted(out)


class Study:
    """In-memory pair schedule over the append-only vote log."""

    def __init__(self, config: StudyConfig):
        self.config = config
        self.lock = threading.Lock()
        self.pairs = {}
        self.pair_order = []
        self._build_pairs()
        self._order_index = {p: i for i, p in enumerate(self.pair_order)}
        self.voted = set()  # (rater_id, pair_id)
        self.votes = []
        self.active = {}  # rater_id -> dict assignment
        os.makedirs(config.data_dir, exist_ok=True)
        self.log_path = os.path.join(config.data_dir, "votes.jsonl")
        self._replay_log()
        self._log = open(self.log_path, "a", encoding="utf-8")

    def _clip_ids(self) -> list:
        if self.config.clips:
            return list(self.config.clips)
        sets = []
        for c in self.config.conditions:
            if os.path.isdir(c.root):
                sets.append({d for d in os.listdir(c.root)
                             if os.path.isdir(os.path.join(c.root, d))})
            else:
                sets.append(set())
        common = set.intersection(*sets) if sets else set()
        return sorted(common)

    def _build_pairs(self):
        clips = self._clip_ids()
        if not clips:
            raise ValidationError("no clips found across all condition roots")
        conds = self.config.conditions
        for clip in clips:
            for i in range(len(conds)):
                for j in range(i + 1, len(conds)):
                    a, b = conds[i], conds[j]
                    if a.reference and b.reference:
                        continue
                    ma, mb = sorted([a.method_id, b.method_id])
                    pid = f"{clip}__{ma}__{mb}"
                    self.pairs[pid] = PairState(pid, clip, ma, mb)
                    self.pair_order.append(pid)

    def _replay_log(self):
        if not os.path.exists(self.log_path):
            return
        with open(self.log_path, encoding="utf-8") as f:
            for lineno, line in enumerate(f, 1):
                line = line.strip()
                if not line:
                    continue
                try:
                    v = VoteRecord.from_dict(json.loads(line))
                except (json.JSONDecodeError, KeyError, ValidationError) as e:
                    raise ValidationError(f"{self.log_path}:{lineno}: bad vote: {e}")
                self._absorb(v)

    def _absorb(self, v: VoteRecord):
        """Update counters for one logged vote."""
        key = (v.rater_id, v.pair_id)
        if key in self.voted:
            raise ValidationError(f"log violates at-most-once for {key}")
        self.voted.add(key)
        self.votes.append(v)
        st = self.pairs.get(v.pair_id)
        if st is not None:
            st.completed_count += 1
            st.served_count += 1
            if v.left_id == st.method_a:
                st.a_left_serves += 1
            else:
                st.b_left_serves += 1

    def _condition(self, method_id) -> Condition:
        for c in self.config.conditions:
            if c.method_id == method_id:
                return c
        raise UnknownPair(f"unknown condition {method_id!r}")

    def _media_info(self, clip_id, method_id) -> dict:
        cond = self._condition(method_id)
        frames = list_frames(os.path.join(cond.root, clip_id))
        return {
            "method_id": method_id,
            "fps": self.config.fps,
            "frame_count": len(frames),
            "urls": [f"/media/{clip_id}/{method_id}/{name}" for name in frames],
        }

    def _assignment_payload(self, st: PairState, left: str, right: str) -> dict:
        return {
            "pair_id": st.pair_id,
            "clip_id": st.clip_id,
            "left_method": left,
            "right_method": right,
            "served_count": st.served_count,
            "completed_count": st.completed_count,
            "left": self._media_info(st.clip_id, left),
            "right": self._media_info(st.clip_id, right),
        }

    def next_pair(self, rater_id: str) -> dict:
        if not rater_id:
            raise MalformedVote("rater_id is required")
        with self.lock:
            held = self.active.get(rater_id)
            if held is not None:
                return held
            candidates = [st for st in (self.pairs[p] for p in self.pair_order)
                          if st.completed_count < self.config.votes_per_pair
                          and (rater_id, st.pair_id) not in self.voted]
            if not candidates:
                raise Exhausted("no pairs left for this rater")
            st = min(candidates,
                     key=lambda s: (s.completed_count, self._order_index[s.pair_id]))
            # counterbalance: serve whichever orientation has run less
            if st.a_left_serves <= st.b_left_serves:
                left, right = st.method_a, st.method_b
                st.a_left_serves += 1
            else:
                left, right = st.method_b, st.method_a
                st.b_left_serves += 1
            st.served_count += 1
            payload = self._assignment_payload(st, left, right)
            self.active[rater_id] = payload
            return payload

    def submit_vote(self, body: dict) -> dict:
        for f in ("rater_id", "pair_id", "rating"):
            if f not in body:
                raise MalformedVote(f"vote is missing {f!r}")
        rater_id = str(body["rater_id"])
        pair_id = str(body["pair_id"])
        try:
            rating = int(body["rating"])
        except (TypeError, ValueError):
            raise MalformedVote(f"rating must be an integer, got {body['rating']!r}")
        if rating not in (1, 2, 3, 4, 5):
            raise MalformedVote(f"rating must be 1..5, got {rating}")
        factor = str(body.get("factor", "none"))
        if factor not in FACTORS:
            raise MalformedVote(f"factor must be one of {FACTORS}")
        with self.lock:
            st = self.pairs.get(pair_id)
            if st is None:
                raise UnknownPair(f"unknown pair_id {pair_id!r}")
            if (rater_id, pair_id) in self.voted:
                raise DuplicateVote(f"{rater_id!r} already voted on {pair_id!r}")
            held = self.active.get(rater_id)
            if held is None or held["pair_id"] != pair_id:
                raise NotAssigned(f"pair {pair_id!r} is not assigned to {rater_id!r}")
            left, right = held["left_method"], held["right_method"]
            if "left_id" in body and (str(body["left_id"]) != left
                                      or str(body.get("right_id")) != right):
                raise MalformedVote("vote orientation does not match the served pair")
            vote = VoteRecord(
                vote_id=f"{rater_id}:{pair_id}",
                rater_id=rater_id, pair_id=pair_id,
                left_id=left, right_id=right,
                rating=rating, factor=factor,
                timestamp=float(body.get("timestamp", 0.0)),
            )
            line = json.dumps(vote.to_dict(), sort_keys=True)
            self._log.write(line + "\n")
            self._log.flush()
            os.fsync(self._log.fileno())
            self.voted.add((rater_id, pair_id))
            self.votes.append(vote)
            st.completed_count += 1
            del self.active[rater_id]
            return {"code": "ok", "vote_id": vote.vote_id,
                    "completed_count": st.completed_count}

    def progress(self) -> dict:
        with self.lock:
            per_pair = [{"pair_id": st.pair_id,
                         "completed": st.completed_count,
                         "target": self.config.votes_per_pair}
                        for st in (self.pairs[p] for p in self.pair_order)]
            return {
                "pairs_total": len(self.pairs),
                "votes_total": len(self.votes),
                "complete": all(p["completed"] >= p["target"] for p in per_pair),
                "pairs": per_pair,
            }

    def export_votes(self) -> str:
        """Raw JSONL, byte-stable while no vote arrives."""
        with self.lock:
            if not os.path.exists(self.log_path):
                return ""
            with open(self.log_path, encoding="utf-8") as f:
                return f.read()

    def media_path(self, clip_id: str, method_id: str, filename: str) -> str:
        cond = self._condition(method_id)
        if not _FRAME_RE.match(filename):
            raise UnknownPair(f"unknown media file {filename!r}")
        path = os.path.join(cond.root, clip_id, filename)
        if not os.path.isfile(path):
            raise UnknownPair(f"no media at {clip_id}/{method_id}/{filename}")
        return path

    def close(self):
        self._log.close()
