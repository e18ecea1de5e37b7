/** Typed client for the triage service JSON API. */

export interface TriageItem {
  instance_id: string;
  text: string;
  score: number;
  predicted_class: number;
  top3: [number, number][];
  class_names: string[];
  status: "pending" | "labeled";
}

export interface LiveMetrics {
  total: number;
  labeled_count: number;
  coverage: number;
  agreement_rate: number;
  has_ground_truth: boolean;
  model_accuracy_on_kept: number | null;
  combined_accuracy: number | null;
}

export type FetchFn = (url: string, init?: RequestInit) => Promise<Response>;

export class ApiError extends Error {
  constructor(
    public status: number,
    public body: unknown,
  ) {
    super(`service returned ${status}`);
  }
}

async function request<T>(fetchFn: FetchFn, url: string, init?: RequestInit): Promise<T> {
  const resp = await fetchFn(url, init);
  const body = await resp.json().catch(() => null);
  if (!resp.ok) {
    throw new ApiError(resp.status, body);
  }
  return body as T;
}

export class TriageApi {
  constructor(private fetchFn: FetchFn) {}

  fetchQueue(status?: "pending" | "labeled", limit?: number): Promise<TriageItem[]> {
    const params = new URLSearchParams();
    if (status) params.set("status", status);
    if (limit !== undefined) params.set("limit", String(limit));
    const qs = params.toString();
    return request(this.fetchFn, `/api/queue${qs ? `?${qs}` : ""}`);
  }

  fetchMetrics(): Promise<LiveMetrics> {
    return request(this.fetchFn, "/api/metrics");
  }

  submitLabel(instanceId: string, label: number, reviewer: string): Promise<{ metrics: LiveMetrics }> {
    return request(this.fetchFn, "/api/labels", {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ instance_id: instanceId, label, reviewer }),
    });
  }
}
