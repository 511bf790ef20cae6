import type { ConsensusPayload, GraphPayload, Report, WhatIfRequest, WhatIfResponse } from "./types";

async function getJson<T>(path: string): Promise<T> {
  const resp = await fetch(path);
  if (!resp.ok) {
    throw new ApiError(resp.status, await safeMessage(resp));
  }
  return (await resp.json()) as T;
}

async function safeMessage(resp: Response): Promise<string> {
  try {
    const body = await resp.json();
    return typeof body.error === "string" ? body.error : resp.statusText;
  } catch {
    return resp.statusText;
  }
}

export class ApiError extends Error {
  constructor(public status: number, message: string) {
    super(message);
  }
}

export const fetchReport = () => getJson<Report>("/api/report");
export const fetchGraph = () => getJson<GraphPayload>("/api/graph");
export const fetchConsensus = () => getJson<ConsensusPayload>("/api/consensus");

export async function postWhatIf(request: WhatIfRequest): Promise<WhatIfResponse> {
  const resp = await fetch("/api/whatif", {
    method: "POST",
    headers: { "Content-Type": "application/json" },
    body: JSON.stringify(request),
  });
  if (!resp.ok) {
    throw new ApiError(resp.status, await safeMessage(resp));
  }
  return (await resp.json()) as WhatIfResponse;
}

/**
 * Serializes what-if requests per module with latest-wins semantics:
 * rapid slider movements coalesce into one in-flight request, and a
 * response is delivered only if it still matches the newest request.
 */
export class WhatIfClient {
  private latest = new Map<number, number>();
  private timer: ReturnType<typeof setTimeout> | null = null;
  private pending: WhatIfRequest | null = null;
  private seq = 0;

  constructor(
    private send: (req: WhatIfRequest) => Promise<WhatIfResponse> = postWhatIf,
    private debounceMs = 150,
  ) {}

  request(moduleId: number, delta: number, onResult: (r: WhatIfResponse) => void, onError?: (e: unknown) => void): void {
    this.pending = { module_id: moduleId, delta };
    if (this.timer !== null) {
      clearTimeout(this.timer);
    }
    this.timer = setTimeout(() => {
      this.timer = null;
      const req = this.pending;
      this.pending = null;
      if (!req) return;
      const ticket = ++this.seq;
      this.latest.set(req.module_id, ticket);
      this.send(req)
        .then((result) => {
          if (this.latest.get(req.module_id) === ticket) {
            onResult(result);
          }
        })
        .catch((err) => {
          if (this.latest.get(req.module_id) === ticket && onError) {
            onError(err);
          }
        });
    }, this.debounceMs);
  }
}
