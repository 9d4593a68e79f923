import { HttpBackend } from "./api.js";
import { CanvasPlayer } from "./player.js";
import { Session } from "./session.js";
import { FACTORS, Factor } from "./types.js";

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing #${id}`);
  return node as T;
}

const backend = new HttpBackend("");
const left = new CanvasPlayer(el<HTMLCanvasElement>("left-canvas"));
const right = new CanvasPlayer(el<HTMLCanvasElement>("right-canvas"));
const session = new Session({
  backend,
  players: [left, right],
  storage: window.localStorage,
  log: (msg) => {
    console.log(msg);
    el("hint").textContent = msg;
  },
});

let rating = 0;
let factor: Factor = "none";

function render(): void {
  const s = session.screen;
  el("study").hidden = s.kind !== "rating";
  el("done").hidden = s.kind !== "done";
  el("status").textContent =
    s.kind === "loading" ? "loading next pair..." :
    s.kind === "error" ? `error: ${s.message}` : "";
  if (s.kind === "rating") {
    el("pair-label").textContent = `clip ${s.assignment.clip_id}`;
    el("skip").hidden = s.mediaError === null;
    el("hint").textContent = s.mediaError === null
      ? (session.canRate() ? "" : "watch both sides, then rate")
      : `media failed: ${s.mediaError}`;
  }
  if (s.kind === "done") {
    el("done-count").textContent = String(s.votesSubmitted);
  }
  for (let i = 1; i <= 5; i++) {
    el(`rate-${i}`).classList.toggle("selected", rating === i);
  }
  for (const f of FACTORS) {
    el(`factor-${f}`).classList.toggle("selected", factor === f);
  }
}

function pickRating(n: number): void {
  if (!session.canRate()) {
    el("hint").textContent = "watch both sides to the end before rating";
    return;
  }
  rating = n;
  render();
}

async function submit(): Promise<void> {
  if (rating === 0) {
    el("hint").textContent = "pick a rating first";
    return;
  }
  try {
    await session.submit(rating, factor);
  } catch (e) {
    el("hint").textContent = String(e);
    return;
  }
  rating = 0;
  factor = "none";
  render();
}

for (let i = 1; i <= 5; i++) {
  el(`rate-${i}`).addEventListener("click", () => pickRating(i));
}
for (const f of FACTORS) {
  el(`factor-${f}`).addEventListener("click", () => {
    factor = f;
    render();
  });
}
el("submit").addEventListener("click", () => void submit());
el("replay").addEventListener("click", () => void session.replay().then(render));
el("skip").addEventListener("click", () =>
  void session.skip("media failed, rater skipped").then(render));
document.addEventListener("keydown", (ev) => {
  const n = Number(ev.key);
  if (n >= 1 && n <= 5) pickRating(n);
  if (ev.key === "Enter") void submit();
});

void session.start().then(render);
