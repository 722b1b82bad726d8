/**
 * Thin typed client for the experiment service HTTP API.
 *
 * The client never sees true-anchor data: task payloads expose only the
 * space text, an opaque reference-audio URL, and public grid geometry.
 * `fetchFn` is injectable so tests can intercept or instrument traffic.
 */

export interface PublicGrid {
  bounds: number[]; // [xMin, xMax, yMin, yMax]
  resolution: number;
  anchors: number[][][]; // 5x5x2 latent coordinates
  unit: number;
}

export interface SessionSummary {
  token: string;
  variant: number;
  taskCount: number;
}

export interface TaskAssignment {
  taskIndex: number;
  spaceText: number;
  referenceUrl: string;
  grid: PublicGrid;
  taskCount: number;
  completed: number;
}

export interface AnswerAck {
  ok: boolean;
  taskIndex: number;
  completed: number;
}

export class ApiError extends Error {
  constructor(
    public readonly status: number,
    message: string,
  ) {
    super(message);
  }
}

type FetchFn = typeof fetch;

/** Structural client interface; fakes in tests implement this too. */
export type ExperimentClient = Pick<
  ExperimentApi,
  "createSession" | "getTask" | "fetchReference" | "audioUrl" | "submitAnswer"
>;

export class ExperimentApi {
  constructor(
    private readonly base: string = "",
    private readonly fetchFn: FetchFn = (...args) => fetch(...args),
  ) {}

  private async request(path: string, init?: RequestInit): Promise<Response> {
    const response = await this.fetchFn(this.base + path, init);
    if (!response.ok) {
      throw new ApiError(response.status, `${path}: HTTP ${response.status}`);
    }
    return response;
  }

  async createSession(variant: number): Promise<SessionSummary> {
    const response = await this.request("/sessions", {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({ variant }),
    });
    const body = await response.json();
    return {
      token: body.token,
      variant: body.variant,
      taskCount: body.task_count,
    };
  }

  async getTask(token: string, index: number): Promise<TaskAssignment> {
    const response = await this.request(`/sessions/${token}/tasks/${index}`);
    const body = await response.json();
    return {
      taskIndex: body.task_index,
      spaceText: body.space_text,
      referenceUrl: body.reference_url,
      grid: body.grid,
      taskCount: body.task_count,
      completed: body.completed,
    };
  }

  /**
   * Pull the reference clip; resolution of this promise is the
   * "reference ready" instant that starts the task timer.
   */
  async fetchReference(url: string): Promise<ArrayBuffer> {
    const response = await this.request(url);
    return response.arrayBuffer();
  }

  /** URL of the stimulus at lattice cell (xi, yi) for a given text. */
  audioUrl(text: number, xi: number, yi: number): string {
    return `${this.base}/audio/${text}/${xi}/${yi}`;
  }

  async submitAnswer(
    token: string,
    answer: { taskIndex: number; x: number; y: number; durationMs: number },
  ): Promise<AnswerAck> {
    const response = await this.request(`/sessions/${token}/answers`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({
        task_index: answer.taskIndex,
        x: answer.x,
        y: answer.y,
        duration_ms: answer.durationMs,
      }),
    });
    const body = await response.json();
    return { ok: body.ok, taskIndex: body.task_index, completed: body.completed };
  }
}
