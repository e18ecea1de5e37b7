/**
 * Review-queue single-page app.
 *
 * The service is the single source of truth: the queue is rendered in
 * the exact order it arrives, metrics come straight from the metrics
 * payload, and conflicts resolve by re-syncing with the service. One
 * label submission may be in flight at a time; number keys 1..9 label
 * the selected document with the corresponding class.
 */
import { ApiError, FetchFn, LiveMetrics, TriageApi, TriageItem } from "./api.js";

export interface QueueViewState {
  items: TriageItem[];
  currentId: string | null;
  metrics: LiveMetrics | null;
  pendingSubmission: boolean;
  error: string | null;
  notice: string | null;
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

function pct(x: number): string {
  return `${(100 * x).toFixed(1)}%`;
}

export class TriageApp {
  readonly state: QueueViewState = {
    items: [],
    currentId: null,
    metrics: null,
    pendingSubmission: false,
    error: null,
    notice: null,
  };
  private api: TriageApi;
  private reviewer: string;

  constructor(
    private root: HTMLElement,
    fetchFn?: FetchFn,
    reviewer = "reviewer",
  ) {
    this.api = new TriageApi(fetchFn ?? ((url, init) => fetch(url, init)));
    this.reviewer = reviewer;
    document.addEventListener("keydown", (ev) => this.onKey(ev));
  }

  async load(): Promise<void> {
    try {
      const [items, metrics] = await Promise.all([
        this.api.fetchQueue("pending"),
        this.api.fetchMetrics(),
      ]);
      this.state.items = items;
      this.state.metrics = metrics;
      this.state.error = null;
      if (!this.state.currentId || !items.some((it) => it.instance_id === this.state.currentId)) {
        this.state.currentId = items.length ? items[0].instance_id : null;
      }
    } catch (err) {
      this.state.error = err instanceof Error ? err.message : String(err);
    }
    this.render();
  }

  current(): TriageItem | null {
    return this.state.items.find((it) => it.instance_id === this.state.currentId) ?? null;
  }

  select(instanceId: string): void {
    this.state.currentId = instanceId;
    this.render();
  }

  private onKey(ev: KeyboardEvent): void {
    const n = Number(ev.key);
    if (!Number.isInteger(n) || n < 1) return;
    const item = this.current();
    if (item && n <= item.class_names.length) {
      void this.submit(n - 1);
    }
  }

  async submit(classIndex: number): Promise<void> {
    const item = this.current();
    if (!item || this.state.pendingSubmission) return;
    this.state.pendingSubmission = true;
    this.render();
    try {
      const ack = await this.api.submitLabel(item.instance_id, classIndex, this.reviewer);
      // optimistic advance: the labeled item leaves the pending queue
      const idx = this.state.items.findIndex((it) => it.instance_id === item.instance_id);
      this.state.items = this.state.items.filter((it) => it.instance_id !== item.instance_id);
      const next = this.state.items[Math.min(idx, this.state.items.length - 1)];
      this.state.currentId = next ? next.instance_id : null;
      this.state.metrics = ack.metrics;
      this.state.notice = `labeled ${item.instance_id} as ${item.class_names[classIndex]}`;
      this.state.error = null;
      this.state.pendingSubmission = false;
      this.render();
      // pick up the authoritative metrics payload
      this.state.metrics = await this.api.fetchMetrics();
      this.render();
    } catch (err) {
      this.state.pendingSubmission = false;
      if (err instanceof ApiError && err.status === 409) {
        // someone labeled it first: adopt the service's view of the queue
        this.state.notice = `${item.instance_id} was already labeled by another reviewer`;
        await this.load();
        return;
      }
      this.state.error = err instanceof Error ? err.message : String(err);
      this.render();
    }
  }

  render(): void {
    const s = this.state;
    this.root.textContent = "";

    const header = el("header", "topbar");
    header.append(el("h1", undefined, "Uncertainty triage queue"));
    header.append(this.renderMetrics());
    this.root.append(header);

    if (s.error) {
      const banner = el("div", "banner error");
      banner.append(el("span", undefined, `Service unreachable: ${s.error}`));
      const retry = el("button", "retry", "Retry");
      retry.addEventListener("click", () => void this.load());
      banner.append(retry);
      this.root.append(banner);
    }
    if (s.notice) {
      this.root.append(el("div", "banner notice", s.notice));
    }

    const main = el("main", "split");
    main.append(this.renderList(), this.renderDetail());
    this.root.append(main);
  }

  private renderMetrics(): HTMLElement {
    const m = this.state.metrics;
    const panel = el("div", "metrics");
    if (!m) {
      panel.append(el("span", "metric", "metrics unavailable"));
      return panel;
    }
    const cells: [string, string][] = [
      ["coverage", `${m.labeled_count}/${m.total} (${pct(m.coverage)})`],
      ["agreement", pct(m.agreement_rate)],
    ];
    if (m.combined_accuracy !== null) {
      cells.push(["combined accuracy", pct(m.combined_accuracy)]);
    }
    if (m.model_accuracy_on_kept !== null) {
      cells.push(["model accuracy (kept)", pct(m.model_accuracy_on_kept)]);
    }
    for (const [label, value] of cells) {
      const cell = el("span", "metric");
      cell.append(el("label", undefined, label), el("b", undefined, value));
      panel.append(cell);
    }
    return panel;
  }

  private renderList(): HTMLElement {
    const list = el("section", "queue");
    list.append(el("h2", undefined, `Pending (${this.state.items.length})`));
    if (!this.state.items.length) {
      list.append(el("p", "empty", "Queue empty: nothing left to review."));
      return list;
    }
    const ul = el("ul", "queue-list");
    for (const item of this.state.items) {
      const li = el("li", item.instance_id === this.state.currentId ? "row selected" : "row");
      li.dataset.id = item.instance_id;
      li.append(
        el("span", "row-id", item.instance_id),
        el("span", "row-score", item.score.toFixed(3)),
      );
      li.addEventListener("click", () => this.select(item.instance_id));
      ul.append(li);
    }
    list.append(ul);
    return list;
  }

  private renderDetail(): HTMLElement {
    const pane = el("section", "detail");
    const item = this.current();
    if (!item) {
      pane.append(el("p", "empty", "Select a document."));
      return pane;
    }
    pane.append(el("h2", undefined, item.instance_id));
    pane.append(el("p", "score", `uncertainty score ${item.score.toFixed(4)}`));
    pane.append(el("pre", "doc-text", item.text));

    const top3 = el("div", "top3");
    top3.append(el("h3", undefined, "Model's top guesses"));
    for (const [cls, freq] of item.top3) {
      const row = el("div", "bar-row");
      row.append(el("span", "bar-label", `${item.class_names[cls] ?? cls}`));
      const track = el("div", "bar-track");
      const fill = el("div", "bar-fill");
      fill.style.width = `${Math.round(100 * freq)}%`;
      track.append(fill);
      row.append(track, el("span", "bar-freq", freq.toFixed(2)));
      top3.append(row);
    }
    pane.append(top3);

    const buttons = el("div", "label-buttons");
    item.class_names.forEach((name, i) => {
      const btn = el("button", "label-btn", `${i + 1}. ${name}`);
      btn.disabled = this.state.pendingSubmission;
      btn.addEventListener("click", () => void this.submit(i));
      buttons.append(btn);
    });
    pane.append(buttons);
    pane.append(el("p", "hint", "press 1-9 to label with the keyboard"));
    return pane;
  }
}

export function mount(root: HTMLElement, fetchFn?: FetchFn, reviewer?: string): TriageApp {
  const app = new TriageApp(root, fetchFn, reviewer);
  void app.load();
  return app;
}

declare global {
  interface Window {
    __triageApp?: TriageApp;
  }
}

if (typeof document !== "undefined" && document.getElementById("app")) {
  window.__triageApp = mount(document.getElementById("app")!);
}
