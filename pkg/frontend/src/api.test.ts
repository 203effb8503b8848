import { describe, expect, it, vi } from "vitest";

import { ApiError, ReviewClient, ReviewItem, isValidScore } from "./api.js";
import { describeItem, statusLine } from "./app.js";

function jsonResponse(body: unknown, status = 200): Response {
  return new Response(JSON.stringify(body), {
    status,
    headers: { "Content-Type": "application/json" },
  });
}

function item(overrides: Partial<ReviewItem> = {}): ReviewItem {
  return {
    item_id: "i1",
    kind: "bench_faith",
    media: [],
    instruction: "rate the rendering",
    status: "pending",
    score: null,
    comment: null,
    annotator_id: null,
    task_id: "t1",
    record_id: null,
    ...overrides,
  };
}

describe("isValidScore", () => {
  it("accepts exactly the integers 1..5", () => {
    for (const good of [1, 2, 3, 4, 5]) expect(isValidScore(good)).toBe(true);
    for (const bad of [0, 6, -1, 3.5, NaN, "4", null, undefined, true]) {
      expect(isValidScore(bad as unknown)).toBe(false);
    }
  });
});

describe("ReviewClient.fetchQueue", () => {
  it("passes annotator and kind as query parameters", async () => {
    const fetchMock = vi.fn(async () => jsonResponse({ items: [item()] }));
    const client = new ReviewClient("", fetchMock as unknown as typeof fetch);
    const items = await client.fetchQueue("alice", "bench_faith");
    expect(items).toHaveLength(1);
    const url = fetchMock.mock.calls[0][0] as string;
    expect(url).toContain("/api/queue?");
    expect(url).toContain("annotator=alice");
    expect(url).toContain("kind=bench_faith");
  });

  it("maps a 401 body to ApiError", async () => {
    const fetchMock = vi.fn(async () =>
      jsonResponse({ error: "unknown annotator" }, 401),
    );
    const client = new ReviewClient("", fetchMock as unknown as typeof fetch);
    await expect(client.fetchQueue("mallory")).rejects.toMatchObject({
      name: "ApiError",
      statusCode: 401,
      message: "unknown annotator",
    });
  });
});

describe("ReviewClient.submitScore", () => {
  it("posts the score as JSON", async () => {
    const fetchMock = vi.fn(async () =>
      jsonResponse({ status: "ok", score: 4, stored: true }),
    );
    const client = new ReviewClient("", fetchMock as unknown as typeof fetch);
    const result = await client.submitScore("i1", "alice", 4, "looks right");
    expect(result.stored).toBe(true);
    const [url, init] = fetchMock.mock.calls[0] as [string, RequestInit];
    expect(url).toBe("/api/item/i1/score");
    expect(init.method).toBe("POST");
    expect(JSON.parse(init.body as string)).toEqual({
      annotator: "alice",
      score: 4,
      comment: "looks right",
    });
  });

  it("rejects out-of-range scores before any request is made", async () => {
    const fetchMock = vi.fn();
    const client = new ReviewClient("", fetchMock as unknown as typeof fetch);
    for (const bad of [0, 6, 2.5]) {
      await expect(client.submitScore("i1", "alice", bad)).rejects.toBeInstanceOf(
        ApiError,
      );
    }
    expect(fetchMock).not.toHaveBeenCalled();
  });

  it("surfaces a 409 conflict with the stored score", async () => {
    const fetchMock = vi.fn(async () =>
      jsonResponse({ error: "already scored", score: 3 }, 409),
    );
    const client = new ReviewClient("", fetchMock as unknown as typeof fetch);
    await expect(client.submitScore("i1", "bob", 5)).rejects.toMatchObject({
      statusCode: 409,
    });
  });
});

describe("presentation helpers", () => {
  it("describes items by kind and target", () => {
    expect(describeItem(item())).toBe("Faithfulness · t1");
    expect(
      describeItem(item({ kind: "reward_spotcheck", task_id: null, record_id: "r9" })),
    ).toBe("Reward spot-check · r9");
  });

  it("maps API errors to friendly status text", () => {
    expect(statusLine(new ApiError("bad score", 400))).toContain("Rejected");
    expect(statusLine(new ApiError("unknown annotator", 401))).toContain(
      "Unknown annotator",
    );
    expect(statusLine(new ApiError("already scored", 409))).toContain(
      "Already scored",
    );
  });
});
