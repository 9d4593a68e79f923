import { parsePpm, PpmImage } from "./ppm.js";
import type { MediaInfo } from "./types.js";

/** One side of the comparison. play() resolves after one complete pass so
 * the session can gate rating on both sides having been watched. */
export interface Player {
  load(media: MediaInfo): Promise<void>;
  play(): Promise<void>;
  stop(): void;
}

/** Frame-sequence playback by canvas blitting at the served fps. All frames
 * are fetched and decoded up front so playback never stalls mid-pass. */
export class CanvasPlayer implements Player {
  private frames: PpmImage[] = [];
  private fps = 30;
  private timer: ReturnType<typeof setTimeout> | null = null;
  private rejectRun: ((e: Error) => void) | null = null;

  constructor(
    private readonly canvas: HTMLCanvasElement,
    private readonly base: string = "",
  ) {}

  async load(media: MediaInfo): Promise<void> {
    this.stop();
    this.fps = media.fps > 0 ? media.fps : 30;
    const fetched = await Promise.all(
      media.urls.map(async (url) => {
        const res = await fetch(this.base + url);
        if (!res.ok) throw new Error(`media fetch failed: ${url} (${res.status})`);
        return parsePpm(new Uint8Array(await res.arrayBuffer()));
      }),
    );
    if (fetched.length === 0) throw new Error("media has no frames");
    this.frames = fetched;
    this.canvas.width = fetched[0].width;
    this.canvas.height = fetched[0].height;
    this.blit(0);
  }

  play(): Promise<void> {
    if (this.frames.length === 0) return Promise.reject(new Error("not loaded"));
    this.stop();
    const interval = 1000 / this.fps;
    return new Promise<void>((resolve, reject) => {
      this.rejectRun = reject;
      let i = 0;
      const tick = () => {
        this.blit(i);
        i++;
        if (i >= this.frames.length) {
          this.timer = null;
          this.rejectRun = null;
          resolve();
          return;
        }
        this.timer = setTimeout(tick, interval);
      };
      tick();
    });
  }

  stop(): void {
    if (this.timer !== null) {
      clearTimeout(this.timer);
      this.timer = null;
    }
    if (this.rejectRun !== null) {
      const rej = this.rejectRun;
      this.rejectRun = null;
      rej(new Error("playback stopped"));
    }
  }

  private blit(i: number): void {
    const ctx = this.canvas.getContext("2d");
    if (!ctx) return;
    const f = this.frames[i];
    const img = ctx.createImageData(f.width, f.height);
    img.data.set(f.rgba);
    ctx.putImageData(img, 0, 0);
  }
}
