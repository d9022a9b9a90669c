import type { AlarmPayload, ViewPayload } from "./types.js";

export class ServiceError extends Error {
  constructor(
    public status: number,
    public code: string,
    public detail: string,
  ) {
    super(`${code}: ${detail}`);
  }
}

async function call(base: string, method: string, path: string, body?: unknown): Promise<any> {
  const res = await fetch(base + path, {
    method,
    body: body === undefined ? undefined : JSON.stringify(body),
  });
  const payload = await res.json().catch(() => ({}));
  if (!res.ok) {
    throw new ServiceError(res.status, payload.error ?? "error", payload.detail ?? res.statusText);
  }
  return payload;
}

/** Thin client over the service endpoints; no state, no retries. */
export class ServiceClient {
  constructor(private base: string = "") {}

  listGraphs(): Promise<{ graphs: any[] }> {
    return call(this.base, "GET", "/graphs");
  }

  createSession(graphId: string): Promise<{ session_id: string; view: ViewPayload }> {
    return call(this.base, "POST", "/sessions", { graph_id: graphId });
  }

  getView(sessionId: string): Promise<{ session_id: string; view: ViewPayload }> {
    return call(this.base, "GET", `/sessions/${sessionId}/view`);
  }

  advance(sessionId: string, choice: string): Promise<{ view: ViewPayload }> {
    return call(this.base, "POST", `/sessions/${sessionId}/advance`, { choice });
  }

  undo(sessionId: string): Promise<{ view: ViewPayload }> {
    return call(this.base, "POST", `/sessions/${sessionId}/undo`);
  }

  verdict(sessionId: string, requirement: string, accept: boolean): Promise<{ view: ViewPayload }> {
    return call(this.base, "POST", `/sessions/${sessionId}/verdict`, { requirement, accept });
  }

  listAlarms(state?: string): Promise<{ alarms: AlarmPayload[] }> {
    return call(this.base, "GET", state ? `/alarms?state=${state}` : "/alarms");
  }

  alarmVerdict(
    alarmId: string,
    decision: "accept_change" | "dismiss",
  ): Promise<{ alarm: AlarmPayload }> {
    return call(this.base, "POST", `/alarms/${alarmId}/verdict`, { decision });
  }
}
