"""Scoring and ranking: RMSE, the objective score, Bradley-Terry fitting with
confidence intervals, the objective tie-break, and MOS.

The BT fit maximizes the standard two-parameter likelihood
P(i beats j) = pi_i / (pi_i + pi_j) by minorization-maximization; ties enter
as half a win for each side. Scores are reported on the log scale in the
gauge sum(log pi) = 0, with 95% intervals from the observed information.
"""

from __future__ import annotations

import csv
import json
import time
from dataclasses import dataclass, field

import numpy as np

from .validation import ValidationError

FACTORS = ("colors", "brightness", "skin_tone", "none")


@dataclass
class VoteRecord:
    vote_id: str
    rater_id: str
    pair_id: str
    left_id: str
    right_id: str
    rating: int
    factor: str = "none"
    timestamp: float = 0.0

    def __post_init__(self):
        self.rating = int(self.rating)
        if self.rating not in (1, 2, 3, 4, 5):
            raise ValidationError(f"rating must be 1..5, got {self.rating}")
        if self.left_id == self.right_id:
            raise ValidationError("left_id and right_id must differ")
        if self.factor not in FACTORS:
            raise ValidationError(f"factor must be one of {FACTORS}, got {self.factor!r}")
        if not self.timestamp:
            self.timestamp = time.time()

    def to_dict(self) -> dict:
        return {"vote_id": self.vote_id, "rater_id": self.rater_id,
                "pair_id": self.pair_id, "left_id": self.left_id,
                "right_id": self.right_id, "rating": self.rating,
                "factor": self.factor, "timestamp": self.timestamp}

    @staticmethod
    def from_dict(d) -> "VoteRecord":
        return VoteRecord(vote_id=str(d["vote_id"]), rater_id=str(d["rater_id"]),
                          pair_id=str(d["pair_id"]), left_id=str(d["left_id"]),
                          right_id=str(d["right_id"]), rating=int(d["rating"]),
                          factor=str(d.get("factor", "none")),
                          timestamp=float(d.get("timestamp", 0.0)))


def read_votes_jsonl(path) -> list:
    votes = []
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, 1):
            line = line.strip()
            if not line:
                continue
            try:
                votes.append(VoteRecord.from_dict(json.loads(line)))
            except (json.JSONDecodeError, KeyError) as e:
                raise ValidationError(f"{path}:{lineno}: bad vote record: {e}")
    return votes


def write_votes_jsonl(votes, path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for v in votes:
            f.write(json.dumps(v.to_dict(), sort_keys=True) + "\n")


def rmse(pred, target) -> float:
    """Root mean squared error over every pixel/channel/frame, [0,1] scale."""
    a = pred.frames if hasattr(pred, "frames") else np.asarray(pred, dtype=np.float64)
    b = target.frames if hasattr(target, "frames") else np.asarray(target, dtype=np.float64)
    if a.shape != b.shape:
        raise ValidationError(f"shape mismatch: {a.shape} vs {b.shape}")
    d = a - b
    return float(np.sqrt(np.mean(d * d)))


def s_real(score_file) -> float:
    """Mean of all 12n values (p plus 11 aux per clip)."""
    if not score_file.scores:
        raise ValidationError("score file has no clips")
    vals = []
    for entry in score_file.scores.values():
        vals.append(entry.p)
        vals.extend(entry.aux)
    return float(np.mean(vals))


S_SYNTH_EPS = 1e-6


def s_synth(rmse_list) -> float:
    """Reciprocal of the mean RMSE, clamped away from zero."""
    r = np.asarray(rmse_list, dtype=np.float64)
    if r.size < 1:
        raise ValidationError("need at least one rmse value")
    if np.any(r < 0):
        raise ValidationError("rmse values must be >= 0")
    return float(1.0 / max(float(r.mean()), S_SYNTH_EPS))


def s_obj(real: float, synth: float) -> float:
    return float(real * synth)


@dataclass
class ObjectiveScore:
    s_real: float
    s_synth: float
    s_obj: float = None

    def __post_init__(self):
        if not (0.0 <= self.s_real <= 1.0):
            raise ValidationError(f"s_real must lie in [0,1], got {self.s_real}")
        if not (self.s_synth > 0):
            raise ValidationError(f"s_synth must be positive, got {self.s_synth}")
        if self.s_obj is None:
            self.s_obj = s_obj(self.s_real, self.s_synth)


class PairCounts:
    """Win/tie tallies per unordered method pair."""

    def __init__(self):
        self._data = {}  # (a, b) with a < b -> [wins_ab, wins_ba, ties]

    def _cell(self, a, b):
        if a == b:
            raise ValidationError("a pair needs two distinct methods")
        key = (a, b) if a < b else (b, a)
        if key not in self._data:
            self._data[key] = [0.0, 0.0, 0.0]
        return key, self._data[key]

    def add_win(self, winner, loser, count=1.0):
        key, cell = self._cell(winner, loser)
        cell[0 if key[0] == winner else 1] += count

    def add_tie(self, a, b, count=1.0):
        _, cell = self._cell(a, b)
        cell[2] += count

    def wins(self, i, j) -> float:
        key = (i, j) if i < j else (j, i)
        cell = self._data.get(key)
        if cell is None:
            return 0.0
        return cell[0] if key[0] == i else cell[1]

    def ties(self, i, j) -> float:
        key = (i, j) if i < j else (j, i)
        cell = self._data.get(key)
        return 0.0 if cell is None else cell[2]

    def methods(self) -> list:
        out = set()
        for a, b in self._data:
            out.add(a)
            out.add(b)
        return sorted(out)

    def pairs(self):
        return sorted(self._data)

    def scale(self, c: float) -> "PairCounts":
        out = PairCounts()
        for key, cell in self._data.items():
            out._data[key] = [v * c for v in cell]
        return out

    def __eq__(self, other):
        return isinstance(other, PairCounts) and self._data == other._data


def votes_to_counts(votes, orientation=None, weighted=False) -> PairCounts:
    """Ratings 1,2 count as a win for the left method, 4,5 for the right,
    3 as a tie. ``weighted`` makes the strong grades (1 and 5) worth two wins.

    ``orientation`` maps pair_id -> (left_id, right_id) for vote records that
    lack explicit sides; records carrying their own sides win over the table.
    """
    counts = PairCounts()
    for v in votes:
        left, right = v.left_id, v.right_id
        if not left or not right:
            if orientation is None or v.pair_id not in orientation:
                raise ValidationError(f"unknown pair_id {v.pair_id!r} (no orientation)")
            left, right = orientation[v.pair_id]
        r = v.rating
        if r == 3:
            counts.add_tie(left, right)
        elif r in (1, 2):
            counts.add_win(left, right, 2.0 if (weighted and r == 1) else 1.0)
        else:
            counts.add_win(right, left, 2.0 if (weighted and r == 5) else 1.0)
    return counts


@dataclass
class MethodScore:
    method: str
    bt_score: float
    ci_low: float
    ci_high: float
    n_comparisons: float
    rank: int = 0


@dataclass
class RankingResult:
    entries: list = field(default_factory=list)

    def by_method(self) -> dict:
        return {e.method: e for e in self.entries}

    def order(self) -> list:
        return [e.method for e in sorted(self.entries, key=lambda e: e.rank)]


class _UnionFind:
    def __init__(self, items):
        self.parent = {i: i for i in items}

    def find(self, x):
        while self.parent[x] != x:
            self.parent[x] = self.parent[self.parent[x]]
            x = self.parent[x]
        return x

    def union(self, a, b):
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            self.parent[ra] = rb

    def groups(self):
        out = {}
        for i in self.parent:
            out.setdefault(self.find(i), []).append(i)
        return list(out.values())


BT_TOL = 1e-10
BT_MAX_ITER = 10_000


def bt_fit(counts: PairCounts) -> RankingResult:
    """Bradley-Terry MLE with 95% observed-information intervals.

    Raises on a disconnected comparison graph (components listed), on empty
    counts, and on degenerate items that never win or never lose even half a
    point (their MLE sits at an infinite boundary).
    """
    methods = counts.methods()
    m = len(methods)
    if m < 2:
        raise ValidationError("degenerate counts: need at least two methods with comparisons")
    idx = {name: i for i, name in enumerate(methods)}
    M = np.zeros((m, m))  # M[i, j] = wins of i over j plus half the ties
    for a, b in counts.pairs():
        i, j = idx[a], idx[b]
        t = counts.ties(a, b)
        M[i, j] = counts.wins(a, b) + 0.5 * t
        M[j, i] = counts.wins(b, a) + 0.5 * t
    N = M + M.T
    if N.sum() == 0:
        raise ValidationError("degenerate counts: all pair counts are zero")

    uf = _UnionFind(methods)
    for a, b in counts.pairs():
        if N[idx[a], idx[b]] > 0:
            uf.union(a, b)
    comps = uf.groups()
    if len(comps) > 1:
        comps = sorted(sorted(c) for c in comps)
        raise ValidationError(f"comparison graph is disconnected: components {comps}")

    W = M.sum(axis=1)
    L = M.sum(axis=0)
    for i, name in enumerate(methods):
        if W[i] == 0 or L[i] == 0:
            raise ValidationError(
                f"degenerate counts: method {name!r} has "
                f"{'no wins' if W[i] == 0 else 'no losses'}, MLE is unbounded")

    pi = np.ones(m)
    off = ~np.eye(m, dtype=bool)

    def loglik(p):
        lp = np.log(p)
        s = np.log(p[:, None] + p[None, :])
        return float(np.sum(M[off] * (lp[:, None] - s)[off]))

    prev_ll = loglik(pi)
    for _ in range(BT_MAX_ITER):
        denom = (N / (pi[:, None] + pi[None, :]))[off].reshape(m, m - 1).sum(axis=1)
        new_pi = W / denom
        new_pi /= np.exp(np.mean(np.log(new_pi)))  # geometric-mean gauge
        change = np.max(np.abs(np.log(new_pi) - np.log(pi)))
        pi = new_pi
        ll = loglik(pi)
        if ll < prev_ll - 1e-9 * (abs(prev_ll) + 1.0):
            raise AssertionError("BT log-likelihood decreased during MM")
        prev_ll = ll
        if change < BT_TOL:
            break

    s = np.log(pi)
    s -= s.mean()

    # Observed information in the log parametrization: a weighted Laplacian
    # (edge weight N_ij p_ij p_ji; the diagonal of wgt is zero since N_ii = 0).
    p_ij = pi[:, None] / (pi[:, None] + pi[None, :])
    wgt = N * p_ij * p_ij.T
    H = np.diag(wgt.sum(axis=1)) - wgt
    cov = np.linalg.pinv(H)  # pseudo-inverse = inverse on the sum-zero gauge
    se = np.sqrt(np.maximum(np.diag(cov), 0.0))

    entries = []
    for i, name in enumerate(methods):
        entries.append(MethodScore(method=name, bt_score=float(s[i]),
                                   ci_low=float(s[i] - 1.96 * se[i]),
                                   ci_high=float(s[i] + 1.96 * se[i]),
                                   n_comparisons=float(N[i].sum())))
    for r, e in enumerate(sorted(entries, key=lambda e: (-e.bt_score, e.method)), 1):
        e.rank = r
    return RankingResult(entries)


def rank_with_tiebreak(bt: RankingResult, obj: dict) -> RankingResult:
    """Final ranking: methods whose 95% CIs overlap (transitively) form tie
    groups ordered internally by objective score, otherwise pure BT order.

    CI-overlap components occupy disjoint score spans, so groups stay
    contiguous in the final order.
    """
    entries = sorted(bt.entries, key=lambda e: (-e.bt_score, e.method))
    uf = _UnionFind([e.method for e in entries])
    for i, a in enumerate(entries):
        for b in entries[i + 1:]:
            if a.ci_low <= b.ci_high and b.ci_low <= a.ci_high:
                uf.union(a.method, b.method)
    group_of = {e.method: uf.find(e.method) for e in entries}
    group_best = {}
    for e in entries:
        g = group_of[e.method]
        group_best.setdefault(g, e.bt_score)

    def obj_score(e):
        if e.method not in obj:
            raise ValidationError(f"missing objective score for tied method {e.method!r}")
        o = obj[e.method]
        return o.s_obj if isinstance(o, ObjectiveScore) else float(o)

    final = []
    for e in entries:
        g = group_of[e.method]
        members = [x for x in entries if group_of[x.method] == g]
        if len(members) > 1:
            key = (-group_best[g], -obj_score(e), e.method)
        else:
            key = (-group_best[g], 0.0, e.method)
        final.append((key, e))
    final.sort(key=lambda t: t[0])
    out = []
    for r, (_, e) in enumerate(final, 1):
        out.append(MethodScore(method=e.method, bt_score=e.bt_score, ci_low=e.ci_low,
                               ci_high=e.ci_high, n_comparisons=e.n_comparisons, rank=r))
    return RankingResult(out)


def mos(votes, target_id: str) -> float:
    """Mean opinion score for one condition, normalized so 5 always means the
    target side is preferred (r -> 6-r when the target was shown left)."""
    if not votes:
        raise ValidationError("need at least one vote")
    vals = []
    for v in votes:
        if v.right_id == target_id:
            vals.append(v.rating)
        elif v.left_id == target_id:
            vals.append(6 - v.rating)
        else:
            raise ValidationError(
                f"vote {v.vote_id!r} does not involve target {target_id!r}")
    return float(np.mean(vals))


def write_ranking(result: RankingResult, json_path=None, csv_path=None) -> None:
    rows = [{"method": e.method, "bt_score": e.bt_score, "ci_low": e.ci_low,
             "ci_high": e.ci_high, "rank": e.rank, "n": e.n_comparisons}
            for e in sorted(result.entries, key=lambda e: e.rank)]
    if json_path:
        with open(json_path, "w", encoding="utf-8") as f:
            json.dump(rows, f, indent=2)
            f.write("\n")
    if csv_path:
        with open(csv_path, "w", newline="", encoding="utf-8") as f:
            w = csv.writer(f)
            w.writerow(["method", "score", "low", "high"])
            for r in rows:
                w.writerow([r["method"], r["bt_score"], r["ci_low"], r["ci_high"]])
