/**
 * Typed client for the review API served by `vizforge review-serve`.
 *
 * The server is authoritative for validation; the checks here exist only to
 * give annotators instant feedback and to keep obviously bad requests off
 * the wire. Scores are integers 1..5, nothing else.
 */

export type ItemKind = "bench_faith" | "reward_spotcheck";

export interface ReviewItem {
  item_id: string;
  kind: ItemKind;
  media: string[];
  instruction: string;
  status: "pending" | "scored";
  score: number | null;
  comment: string | null;
  annotator_id: string | null;
  task_id: string | null;
  record_id: string | null;
}

export interface SubmitResult {
  status: string;
  score: number;
  stored: boolean;
}

export class ApiError extends Error {
  constructor(
    message: string,
    public readonly statusCode: number,
  ) {
    super(message);
    this.name = "ApiError";
  }
}

/** True iff the value is a usable annotator score. */
export function isValidScore(value: unknown): value is number {
  return (
    typeof value === "number" &&
    Number.isInteger(value) &&
    value >= 1 &&
    value <= 5
  );
}

async function errorFrom(response: Response): Promise<ApiError> {
  let detail = response.statusText;
  try {
    const body = await response.json();
    if (body && typeof body.error === "string") detail = body.error;
  } catch {
    // non-JSON error body; keep the status text
  }
  return new ApiError(detail, response.status);
}

export class ReviewClient {
  constructor(
    private readonly baseUrl: string = "",
    private readonly fetchImpl: typeof fetch = fetch,
  ) {}

  async fetchQueue(annotator: string, kind?: ItemKind): Promise<ReviewItem[]> {
    const params = new URLSearchParams({ annotator });
    if (kind) params.set("kind", kind);
    const response = await this.fetchImpl(
      `${this.baseUrl}/api/queue?${params.toString()}`,
    );
    if (!response.ok) throw await errorFrom(response);
    const body = await response.json();
    return body.items as ReviewItem[];
  }

  mediaUrl(itemId: string): string {
    return `${this.baseUrl}/api/item/${encodeURIComponent(itemId)}/media`;
  }

  async submitScore(
    itemId: string,
    annotator: string,
    score: number,
    comment?: string,
  ): Promise<SubmitResult> {
    if (!isValidScore(score)) {
      throw new ApiError(`score must be an integer in [1,5], got ${score}`, 400);
    }
    const response = await this.fetchImpl(
      `${this.baseUrl}/api/item/${encodeURIComponent(itemId)}/score`,
      {
        method: "POST",
        headers: { "Content-Type": "application/json" },
        body: JSON.stringify({ annotator, score, comment: comment ?? null }),
      },
    );
    if (!response.ok) throw await errorFrom(response);
    return (await response.json()) as SubmitResult;
  }
}
