/**
 * Review queue UI: one card per pending item, score buttons 1..5, optional
 * comment. Conflicts (someone else scored first) and validation errors are
 * surfaced inline; the queue reloads after every submission.
 */

import { ApiError, ReviewClient, ReviewItem, isValidScore } from "./api.js";

const SCORE_LABELS: Record<number, string> = {
  1: "Very poor",
  2: "Poor",
  3: "Fair",
  4: "Good",
  5: "Excellent",
};

export function describeItem(item: ReviewItem): string {
  const what = item.kind === "bench_faith" ? "Faithfulness" : "Reward spot-check";
  const target = item.task_id ?? item.record_id ?? item.item_id;
  return `${what} · ${target}`;
}

export function statusLine(error: unknown): string {
  if (error instanceof ApiError) {
    switch (error.statusCode) {
      case 400:
        return `Rejected: ${error.message}`;
      case 401:
        return "Unknown annotator. Check the name and reload.";
      case 409:
        return `Already scored by someone else (stored score ${error.message.replace(/\D/g, "") || "?"}).`;
      default:
        return `Request failed (${error.statusCode}): ${error.message}`;
    }
  }
  return `Request failed: ${String(error)}`;
}

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  className?: string,
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  if (className) node.className = className;
  if (text !== undefined) node.textContent = text;
  return node;
}

export class App {
  private annotator = "";

  constructor(
    private readonly client: ReviewClient,
    private readonly root: HTMLElement,
  ) {}

  mount(): void {
    const bar = el("div", "topbar");
    const input = el("input") as HTMLInputElement;
    input.placeholder = "annotator id";
    input.id = "annotator";
    const load = el("button", "primary", "Load queue");
    load.addEventListener("click", () => {
      this.annotator = input.value.trim();
      void this.refresh();
    });
    bar.append(input, load);
    this.root.append(bar, el("div", "status"), el("div", "queue"));
  }

  private setStatus(text: string): void {
    const status = this.root.querySelector<HTMLElement>(".status");
    if (status) status.textContent = text;
  }

  async refresh(): Promise<void> {
    const queue = this.root.querySelector<HTMLElement>(".queue");
    if (!queue) return;
    queue.replaceChildren();
    if (!this.annotator) {
      this.setStatus("Enter an annotator id first.");
      return;
    }
    try {
      const items = await this.client.fetchQueue(this.annotator);
      this.setStatus(items.length ? `${items.length} pending` : "Queue empty.");
      for (const item of items) queue.append(this.card(item));
    } catch (error) {
      this.setStatus(statusLine(error));
    }
  }

  private card(item: ReviewItem): HTMLElement {
    const card = el("div", "card");
    card.append(el("h3", undefined, describeItem(item)));
    card.append(el("p", "instruction", item.instruction));

    if (item.media.length > 0) {
      const img = el("img") as HTMLImageElement;
      img.src = this.client.mediaUrl(item.item_id);
      img.alt = "rendered output";
      card.append(img);
    }

    const comment = el("textarea") as HTMLTextAreaElement;
    comment.placeholder = "optional comment";

    const buttons = el("div", "scores");
    for (let score = 1; score <= 5; score++) {
      const button = el("button", "score", `${score} ${SCORE_LABELS[score]}`);
      button.addEventListener("click", () => {
        void this.submit(item, score, comment.value || undefined);
      });
      buttons.append(button);
    }
    card.append(buttons, comment);
    return card;
  }

  private async submit(
    item: ReviewItem,
    score: number,
    comment?: string,
  ): Promise<void> {
    if (!isValidScore(score)) {
      this.setStatus(`Rejected: score must be an integer in [1,5]`);
      return;
    }
    try {
      const result = await this.client.submitScore(
        item.item_id,
        this.annotator,
        score,
        comment,
      );
      this.setStatus(
        result.stored
          ? `Scored ${item.item_id}: ${result.score}`
          : `Already scored (stored ${result.score}).`,
      );
    } catch (error) {
      this.setStatus(statusLine(error));
    }
    await this.refresh();
  }
}

export function start(): void {
  const root = document.getElementById("app");
  if (!root) throw new Error("missing #app container");
  const app = new App(new ReviewClient(), root);
  app.mount();
}

if (typeof document !== "undefined" && document.getElementById("app")) {
  start();
}
