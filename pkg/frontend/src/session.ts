import { ApiError, Backend } from "./api.js";
import type { Player } from "./player.js";
import { Factor, PairAssignment, VoteBody, isRating } from "./types.js";

/** Minimal slice of localStorage so tests can swap in a memory map. */
export interface KeyValue {
  getItem(key: string): string | null;
  setItem(key: string, value: string): void;
}

export type Screen =
  | { kind: "loading" }
  | { kind: "rating"; assignment: PairAssignment; mediaError: string | null }
  | { kind: "done"; votesSubmitted: number }
  | { kind: "error"; message: string };

export interface SessionDeps {
  backend: Backend;
  players: [Player, Player];
  storage: KeyValue;
  log?: (msg: string) => void;
}

const RATER_KEY = "rater-ui.rater_id";

function freshRaterId(): string {
  const bytes = new Uint8Array(8);
  crypto.getRandomValues(bytes);
  let hex = "";
  for (const b of bytes) hex += b.toString(16).padStart(2, "0");
  return `rater-${hex}`;
}

/** Drives one rater through the study: fetch pair, lockstep playback, gated
 * rating, submit, advance. One active pair at a time; every server call is
 * sequential. Survives refreshes without double votes because the rater id
 * persists and the server re-serves the held pair until the vote lands. */
export class Session {
  readonly raterId: string;
  screen: Screen = { kind: "loading" };
  votesSubmitted = 0;

  private current: PairAssignment | null = null;
  private playedThrough = false;
  private readonly log: (msg: string) => void;

  constructor(private readonly deps: SessionDeps) {
    this.log = deps.log ?? (() => undefined);
    let id = deps.storage.getItem(RATER_KEY);
    if (!id) {
      id = freshRaterId();
      deps.storage.setItem(RATER_KEY, id);
    }
    this.raterId = id;
  }

  /** True once both sides have finished one full pass of the current pair. */
  canRate(): boolean {
    return this.playedThrough && this.current !== null;
  }

  async start(): Promise<Screen> {
    return this.advance();
  }

  /** Re-request the current pair after a media failure, logging the reason.
   * The server holds the assignment, so this re-serves the same pair. */
  async skip(reason: string): Promise<Screen> {
    this.log(`skip: ${reason}`);
    this.current = null;
    return this.advance();
  }

  async replay(): Promise<void> {
    if (this.current === null) return;
    const [l, r] = this.deps.players;
    await Promise.all([l.play(), r.play()]);
  }

  async submit(rating: number, factor: Factor): Promise<Screen> {
    const a = this.current;
    if (a === null) throw new Error("no pair assigned");
    if (!isRating(rating)) throw new Error(`rating must be an integer 1..5, got ${rating}`);
    if (!this.playedThrough) {
      // rating before both sides finished one pass is ignored with a hint
      this.log("watch both sides to the end before rating");
      return this.screen;
    }
    if (rating !== 3 && factor === "none") {
      throw new Error("pick the deciding factor, or rate 3 for no preference");
    }
    const body: VoteBody = {
      rater_id: this.raterId,
      pair_id: a.pair_id,
      left_id: a.left_method,
      right_id: a.right_method,
      rating,
      factor,
    };
    const recorded = await this.deliver(body);
    if (recorded) this.votesSubmitted += 1;
    this.current = null;
    this.playedThrough = false;
    return this.advance();
  }

  /** Sends one vote at-most-once. Returns whether this call recorded a new
   * vote. A duplicate conflict means the vote already counted, so the caller
   * advances without incrementing. A network failure re-fetches the
   * idempotent assignment to learn whether the vote landed. */
  private async deliver(body: VoteBody): Promise<boolean> {
    for (let attempt = 0; attempt < 4; attempt++) {
      try {
        await this.deps.backend.submitVote(body);
        return true;
      } catch (e) {
        if (e instanceof ApiError) {
          if (e.code === "duplicate_vote") return false;
          throw e;
        }
        this.log(`vote delivery failed (${String(e)}), checking assignment`);
        let served: PairAssignment;
        try {
          served = await this.deps.backend.nextPair(this.raterId);
        } catch (e2) {
          if (e2 instanceof ApiError && e2.code === "exhausted") return true;
          if (e2 instanceof ApiError) throw e2;
          continue; // still offline; try the vote again
        }
        if (served.pair_id !== body.pair_id) return true; // it landed
        // same pair still assigned: the vote was lost, resubmit
      }
    }
    throw new Error("vote delivery failed after retries");
  }

  private async advance(): Promise<Screen> {
    this.screen = { kind: "loading" };
    let a: PairAssignment;
    try {
      a = await this.deps.backend.nextPair(this.raterId);
    } catch (e) {
      if (e instanceof ApiError && e.code === "exhausted") {
        this.screen = { kind: "done", votesSubmitted: this.votesSubmitted };
      } else {
        this.screen = { kind: "error", message: String(e) };
      }
      return this.screen;
    }
    this.current = a;
    this.playedThrough = false;
    const [l, r] = this.deps.players;
    try {
      await Promise.all([l.load(a.left), r.load(a.right)]);
      this.screen = { kind: "rating", assignment: a, mediaError: null };
      await Promise.all([l.play(), r.play()]); // lockstep start
      this.playedThrough = true;
    } catch (e) {
      this.log(`media failure on ${a.pair_id}: ${String(e)}`);
      this.screen = { kind: "rating", assignment: a, mediaError: String(e) };
    }
    return this.screen;
  }
}
