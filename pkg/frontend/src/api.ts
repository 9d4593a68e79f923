import type { PairAssignment, Progress, VoteBody } from "./types.js";

/** Error body {code, message} from the service, with the HTTP status. */
export class ApiError extends Error {
  constructor(
    public readonly status: number,
    public readonly code: string,
    message: string,
  ) {
    super(message);
    this.name = "ApiError";
  }
}

async function raise(res: Response): Promise<never> {
  let code = "unknown";
  let message = `HTTP ${res.status}`;
  try {
    const body = await res.json();
    if (body && typeof body.code === "string") code = body.code;
    if (body && typeof body.message === "string") message = body.message;
  } catch {
    // non-JSON error body; keep the defaults
  }
  throw new ApiError(res.status, code, message);
}

/** What the session controller needs from the server. */
export interface Backend {
  nextPair(raterId: string): Promise<PairAssignment>;
  submitVote(vote: VoteBody): Promise<void>;
  progress(): Promise<Progress>;
}

export class HttpBackend implements Backend {
  constructor(private readonly base: string = "") {}

  async nextPair(raterId: string): Promise<PairAssignment> {
    const res = await fetch(
      `${this.base}/api/pair?rater_id=${encodeURIComponent(raterId)}`,
    );
    if (!res.ok) await raise(res);
    return (await res.json()) as PairAssignment;
  }

  async submitVote(vote: VoteBody): Promise<void> {
    const res = await fetch(`${this.base}/api/vote`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(vote),
    });
    if (!res.ok) await raise(res);
  }

  async progress(): Promise<Progress> {
    const res = await fetch(`${this.base}/api/progress`);
    if (!res.ok) await raise(res);
    return (await res.json()) as Progress;
  }
}
