import type {
  CommandResponse,
  Engine,
  HealthResponse,
  NewSessionResponse,
  SessionDoc,
  SweepResponse,
  UndoResponse,
} from "./types.js";

export class ApiError extends Error {
  constructor(public status: number, reason: string) {
    super(reason);
  }
}

async function request<T>(path: string, init?: RequestInit): Promise<T> {
  const res = await fetch(path, {
    headers: { "Content-Type": "application/json" },
    ...init,
  });
  const body = await res.json().catch(() => ({}));
  if (!res.ok) {
    throw new ApiError(res.status, (body as { error?: string }).error ?? res.statusText);
  }
  return body as T;
}

/** Typed client for the reshaping session API; all numbers come from the
 * server, the client performs no trajectory math. */
export class ApiClient {
  constructor(private base: string = "") {}

  health(): Promise<HealthResponse> {
    return request(`${this.base}/api/v1/health`);
  }

  newSession(engine: Engine, seed?: number): Promise<NewSessionResponse> {
    return request(`${this.base}/api/v1/session`, {
      method: "POST",
      body: JSON.stringify(seed === undefined ? { engine } : { engine, seed }),
    });
  }

  getSession(id: string): Promise<SessionDoc> {
    return request(`${this.base}/api/v1/session/${id}`);
  }

  command(id: string, text: string, engine?: Engine): Promise<CommandResponse> {
    return request(`${this.base}/api/v1/session/${id}/command`, {
      method: "POST",
      body: JSON.stringify(engine ? { text, engine } : { text }),
    });
  }

  preview(id: string, text: string, engine: Engine): Promise<CommandResponse> {
    return request(`${this.base}/api/v1/session/${id}/preview`, {
      method: "POST",
      body: JSON.stringify({ text, engine }),
    });
  }

  undo(id: string): Promise<UndoResponse> {
    return request(`${this.base}/api/v1/session/${id}/undo`, {
      method: "POST",
      body: JSON.stringify({}),
    });
  }

  sweep(id: string, target?: number): Promise<SweepResponse> {
    return request(`${this.base}/api/v1/session/${id}/sweep`, {
      method: "POST",
      body: JSON.stringify(target === undefined ? {} : { target }),
    });
  }
}
