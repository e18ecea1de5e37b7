// @vitest-environment happy-dom
import { beforeEach, describe, expect, it } from "vitest";

import { TriageApp } from "../src/app.js";
import { FakeService, fixtureItems } from "./fake_service.js";

function mountApp(service: FakeService): TriageApp {
  document.body.innerHTML = '<div id="app"></div>';
  return new TriageApp(document.getElementById("app")!, service.fetch, "tester");
}

function rowIds(): string[] {
  return [...document.querySelectorAll<HTMLElement>(".queue-list .row")].map(
    (el) => el.dataset.id!,
  );
}

function metricValue(label: string): string | undefined {
  for (const cell of document.querySelectorAll(".metric")) {
    if (cell.querySelector("label")?.textContent === label) {
      return cell.querySelector("b")?.textContent ?? undefined;
    }
  }
  return undefined;
}

describe("queue rendering", () => {
  let service: FakeService;
  let app: TriageApp;

  beforeEach(async () => {
    service = new FakeService(fixtureItems());
    app = mountApp(service);
    await app.load();
  });

  it("renders items in service order (score descending)", () => {
    expect(rowIds()).toEqual(["doc-a", "doc-b", "doc-c"]);
    const scores = [...document.querySelectorAll(".row-score")].map((el) =>
      Number(el.textContent),
    );
    expect(scores).toEqual([...scores].sort((a, b) => b - a));
  });

  it("shows the detail pane for the first item with top3 bars in order", () => {
    expect(document.querySelector(".detail h2")?.textContent).toBe("doc-a");
    const freqs = [...document.querySelectorAll(".bar-freq")].map((el) =>
      Number(el.textContent),
    );
    expect(freqs).toEqual([0.48, 0.4, 0.12]);
    const widths = [...document.querySelectorAll<HTMLElement>(".bar-fill")].map(
      (el) => el.style.width,
    );
    expect(widths).toEqual(["48%", "40%", "12%"]);
  });

  it("renders one label button per class", () => {
    const labels = [...document.querySelectorAll(".label-btn")].map((b) => b.textContent);
    expect(labels).toEqual([
      "1. sci.space",
      "2. rec.sport",
      "3. comp.graphics",
      "4. talk.politics",
    ]);
  });

  it("shows the empty state when the queue is empty", async () => {
    const empty = new FakeService([]);
    const app2 = mountApp(empty);
    await app2.load();
    expect(document.querySelector(".queue .empty")?.textContent).toContain("Queue empty");
  });
});

describe("labeling flow", () => {
  let service: FakeService;
  let app: TriageApp;

  beforeEach(async () => {
    service = new FakeService(fixtureItems());
    app = mountApp(service);
    await app.load();
  });

  it("labeling removes the item, advances, and updates coverage", async () => {
    expect(metricValue("coverage")).toBe("0/3 (0.0%)");
    await app.submit(0);
    expect(rowIds()).toEqual(["doc-b", "doc-c"]);
    expect(document.querySelector(".detail h2")?.textContent).toBe("doc-b");
    expect(service.labels.get("doc-a")).toBe(0);
    expect(metricValue("coverage")).toBe("1/3 (33.3%)");
  });

  it("labels the selected item, not just the head", async () => {
    app.select("doc-c");
    await app.submit(2);
    expect(service.labels.get("doc-c")).toBe(2);
    expect(rowIds()).toEqual(["doc-a", "doc-b"]);
  });

  it("number keys map to classes", async () => {
    document.dispatchEvent(new KeyboardEvent("keydown", { key: "2" }));
    await new Promise((r) => setTimeout(r, 0));
    expect(service.labels.get("doc-a")).toBe(1);
  });

  it("metrics panel mirrors the service payload after labeling", async () => {
    await app.submit(0);
    const serverMetrics = service.metrics();
    expect(app.state.metrics).toEqual(serverMetrics);
    expect(metricValue("combined accuracy")).toBe(
      `${(100 * serverMetrics.combined_accuracy!).toFixed(1)}%`,
    );
  });

  it("duplicate-label race resolves to the service state", async () => {
    service.labelDirectly("doc-a", 3); // another reviewer wins the race
    await app.submit(0);
    expect(service.labels.get("doc-a")).toBe(3); // original retained
    expect(rowIds()).toEqual(["doc-b", "doc-c"]); // re-synced with service
    expect(document.querySelector(".banner.notice")?.textContent).toContain(
      "already labeled",
    );
    expect(metricValue("coverage")).toBe("1/3 (33.3%)");
  });

  it("only one submission is in flight at a time", async () => {
    const first = app.submit(0);
    const second = app.submit(1); // ignored: a submission is pending
    await Promise.all([first, second]);
    const posts = service.requests.filter((r) => r.startsWith("POST"));
    expect(posts).toHaveLength(1);
    expect(service.labels.size).toBe(1);
  });
});

describe("failure handling", () => {
  it("shows an error banner with retry when the service is unreachable", async () => {
    const service = new FakeService(fixtureItems());
    service.failNetwork = true;
    const app = mountApp(service);
    await app.load();
    expect(document.querySelector(".banner.error")).toBeTruthy();
    service.failNetwork = false;
    (document.querySelector(".banner.error .retry") as HTMLButtonElement).click();
    await new Promise((r) => setTimeout(r, 0));
    expect(document.querySelector(".banner.error")).toBeNull();
    expect(rowIds()).toHaveLength(3);
  });

  it("a failed submission is surfaced, never silently dropped", async () => {
    const service = new FakeService(fixtureItems());
    const app = mountApp(service);
    await app.load();
    service.failNetwork = true;
    await app.submit(0);
    expect(document.querySelector(".banner.error")).toBeTruthy();
    expect(rowIds()).toHaveLength(3); // item still pending locally
    service.failNetwork = false;
    await app.submit(0); // retry succeeds
    expect(service.labels.get("doc-a")).toBe(0);
  });
});
