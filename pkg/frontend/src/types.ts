// Wire types for the study-service JSON API. Field names match the server
// payloads verbatim; keep snake_case.

export const FACTORS = ["colors", "brightness", "skin_tone", "none"] as const;
export type Factor = (typeof FACTORS)[number];

export type Rating = 1 | 2 | 3 | 4 | 5;

export interface MediaInfo {
  method_id: string;
  fps: number;
  frame_count: number;
  urls: string[];
}

export interface PairAssignment {
  pair_id: string;
  clip_id: string;
  left_method: string;
  right_method: string;
  served_count: number;
  completed_count: number;
  left: MediaInfo;
  right: MediaInfo;
}

export interface VoteBody {
  rater_id: string;
  pair_id: string;
  left_id: string;
  right_id: string;
  rating: Rating;
  factor: Factor;
}

export interface Progress {
  pairs_total: number;
  votes_total: number;
  complete: boolean;
  pairs: { pair_id: string; completed: number; target: number }[];
}

export function isRating(n: number): n is Rating {
  return Number.isInteger(n) && n >= 1 && n <= 5;
}

export function isFactor(s: string): s is Factor {
  return (FACTORS as readonly string[]).includes(s);
}
