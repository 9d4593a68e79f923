// End-to-end against the real service: spawn it over a temp study, drive a
// scripted session through 4 pairs with real media fetches, then check the
// export, duplicate rejection, and orientation balance from the outside.

import { spawn, ChildProcess } from "node:child_process";
import { mkdtempSync, mkdirSync, rmSync, writeFileSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";
import { afterAll, beforeAll, describe, expect, it } from "vitest";

import { HttpBackend } from "../src/api.js";
import { Session } from "../src/session.js";
import type { VoteBody } from "../src/types.js";
import { FakePlayer, MemoryStorage } from "./fakes.js";

const PORT = 8123 + (process.pid % 1000);
const BASE = `http://127.0.0.1:${PORT}`;
const CLIPS = ["clip0", "clip1", "clip2", "clip3"];
const METHODS = ["m1", "m2"];

let root: string;
let server: ChildProcess | null = null;

function ppmBytes(w: number, h: number, seed: number): Buffer {
  const head = Buffer.from(`P6\n${w} ${h}\n255\n`, "ascii");
  const px = Buffer.alloc(w * h * 3);
  let s = seed >>> 0;
  for (let i = 0; i < px.length; i++) {
    s = (Math.imul(s, 1103515245) + 12345) >>> 0;
    px[i] = s % 256;
  }
  return Buffer.concat([head, px]);
}

async function waitReady(timeoutMs = 30_000): Promise<void> {
  const deadline = Date.now() + timeoutMs;
  while (Date.now() < deadline) {
    try {
      const res = await fetch(`${BASE}/api/progress`);
      if (res.ok) return;
    } catch {
      // not up yet
    }
    await new Promise((r) => setTimeout(r, 200));
  }
  throw new Error("service did not come up");
}

beforeAll(async () => {
  root = mkdtempSync(join(tmpdir(), "rater-ui-live-"));
  for (const m of METHODS) {
    for (const c of CLIPS) {
      const dir = join(root, m, c);
      mkdirSync(dir, { recursive: true });
      for (let f = 0; f < 2; f++) {
        writeFileSync(
          join(dir, `frame_${String(f).padStart(6, "0")}.ppm`),
          ppmBytes(4, 4, f + 10 * CLIPS.indexOf(c) + 100 * METHODS.indexOf(m)),
        );
      }
    }
  }
  const config = {
    conditions: METHODS.map((m) => ({ method_id: m, root: join(root, m) })),
    votes_per_pair: 2,
    fps: 8,
    data_dir: join(root, "state"),
  };
  writeFileSync(join(root, "study.json"), JSON.stringify(config));
  server = spawn(
    "python3",
    ["-m", "vqekit.cli", "serve", "--config", join(root, "study.json"),
     "--host", "127.0.0.1", "--port", String(PORT)],
    { stdio: "ignore" },
  );
  await waitReady();
}, 60_000);

afterAll(() => {
  if (server) server.kill("SIGTERM");
  rmSync(root, { recursive: true, force: true });
});

interface Action {
  pair_id: string;
  left_id: string;
  right_id: string;
  rating: number;
}

const actions: Action[] = [];
let firstVote: VoteBody | null = null;

async function runSession(ratings: number[], factors: string[]): Promise<number> {
  const backend = new HttpBackend(BASE);
  const players: [FakePlayer, FakePlayer] = [
    new FakePlayer(BASE),
    new FakePlayer(BASE),
  ];
  const session = new Session({
    backend,
    players,
    storage: new MemoryStorage(),
  });
  let screen = await session.start();
  let i = 0;
  while (screen.kind === "rating" && i < ratings.length) {
    actions.push({
      pair_id: screen.assignment.pair_id,
      left_id: screen.assignment.left_method,
      right_id: screen.assignment.right_method,
      rating: ratings[i],
    });
    if (firstVote === null) {
      firstVote = {
        rater_id: session.raterId,
        pair_id: screen.assignment.pair_id,
        left_id: screen.assignment.left_method,
        right_id: screen.assignment.right_method,
        rating: ratings[i] as VoteBody["rating"],
        factor: factors[i] as VoteBody["factor"],
      };
    }
    screen = await session.submit(ratings[i], factors[i] as VoteBody["factor"]);
    i++;
  }
  expect(screen.kind).toBe("done");
  return session.votesSubmitted;
}

type Counts = Map<string, { wins: Map<string, number>; ties: number }>;

function votesToCounts(votes: Action[]): Counts {
  const counts: Counts = new Map();
  for (const v of votes) {
    const [a, b] = [v.left_id, v.right_id].sort();
    const key = `${a}|${b}`;
    if (!counts.has(key)) {
      counts.set(key, { wins: new Map([[a, 0], [b, 0]]), ties: 0 });
    }
    const cell = counts.get(key)!;
    if (v.rating === 3) cell.ties += 1;
    else {
      const winner = v.rating <= 2 ? v.left_id : v.right_id;
      cell.wins.set(winner, (cell.wins.get(winner) ?? 0) + 1);
    }
  }
  return counts;
}

describe("live study loop", () => {
  it("a scripted session completes 4 pairs", async () => {
    const n = await runSession([1, 3, 4, 5], ["colors", "none", "brightness", "skin_tone"]);
    expect(n).toBe(4);
  }, 30_000);

  it("rejects a duplicate submission", async () => {
    expect(firstVote).not.toBeNull();
    const res = await fetch(`${BASE}/api/vote`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(firstVote),
    });
    expect(res.status).toBe(409);
    const body = await res.json();
    expect(body.code).toBe("duplicate_vote");
  }, 15_000);

  it("a second rater fills the remaining serves", async () => {
    const n = await runSession([2, 4, 3, 1], ["skin_tone", "colors", "none", "brightness"]);
    expect(n).toBe(4);
  }, 30_000);

  it("the export matches the sessions' actions pair for pair", async () => {
    const res = await fetch(`${BASE}/api/export`);
    expect(res.ok).toBe(true);
    const lines = (await res.text()).split("\n").filter((l) => l.trim().length > 0);
    expect(lines.length).toBe(8);
    const exported: Action[] = lines.map((l) => {
      const rec = JSON.parse(l);
      return {
        pair_id: rec.pair_id,
        left_id: rec.left_id,
        right_id: rec.right_id,
        rating: rec.rating,
      };
    });
    const got = votesToCounts(exported);
    const want = votesToCounts(actions);
    expect(got.size).toBe(want.size);
    for (const [key, cell] of want) {
      const other = got.get(key);
      expect(other).toBeDefined();
      expect(other!.ties).toBe(cell.ties);
      expect(Object.fromEntries(other!.wins)).toEqual(Object.fromEntries(cell.wins));
    }
  }, 15_000);

  it("per-pair orientation counts differ by at most one", async () => {
    const perPair = new Map<string, { aLeft: number; bLeft: number }>();
    for (const a of actions) {
      const [x] = [a.left_id, a.right_id].sort();
      const cell = perPair.get(a.pair_id) ?? { aLeft: 0, bLeft: 0 };
      if (a.left_id === x) cell.aLeft += 1;
      else cell.bLeft += 1;
      perPair.set(a.pair_id, cell);
    }
    expect(perPair.size).toBe(4);
    for (const [, cell] of perPair) {
      expect(Math.abs(cell.aLeft - cell.bLeft)).toBeLessThanOrEqual(1);
    }
  }, 15_000);
});
