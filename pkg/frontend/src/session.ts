/**
 * Session state machine for one participant.
 *
 * Drives the 15-task flow independently of the DOM: the UI layer renders
 * whatever this controller says and forwards clicks/submits back in.
 * Submissions are strictly sequential; a failed submit is retained and
 * retried (the server treats duplicates as last-write-wins, so an
 * ack-loss retry is harmless).
 */

import type {
  ExperimentClient,
  PublicGrid,
  TaskAssignment,
} from "./api";
import {
  Bounds,
  Point,
  boundsFromArray,
  clampToBounds,
  nearestLatticeIndex,
} from "./coords";

export type Phase =
  | "idle"
  | "loading"
  | "task"
  | "submitting"
  | "done";

export interface ControllerState {
  phase: Phase;
  token: string | null;
  variant: number | null;
  taskIndex: number; // 1-based; meaningful in phase "task"
  taskCount: number;
  spaceText: number | null;
  lastClicked: Point | null;
  playsCount: number;
  submitError: string | null;
}

/** Millisecond clock; injectable so tests control elapsed time. */
export type Clock = () => number;

const defaultClock: Clock = () =>
  typeof performance !== "undefined" ? performance.now() : Date.now();

export class SessionController {
  private phase: Phase = "idle";
  private token: string | null = null;
  private variant: number | null = null;
  private taskCount = 0;
  private task: TaskAssignment | null = null;
  private lastClicked: Point | null = null;
  private playsCount = 0;
  private taskStart: number | null = null;
  private submitError: string | null = null;
  private listeners: Array<(s: ControllerState) => void> = [];

  constructor(
    private readonly api: ExperimentClient,
    private readonly clock: Clock = defaultClock,
  ) {}

  onChange(listener: (s: ControllerState) => void): void {
    this.listeners.push(listener);
  }

  private emit(): void {
    const snapshot = this.state;
    for (const listener of this.listeners) listener(snapshot);
  }

  get state(): ControllerState {
    return {
      phase: this.phase,
      token: this.token,
      variant: this.variant,
      taskIndex: this.task?.taskIndex ?? 0,
      taskCount: this.taskCount,
      spaceText: this.task?.spaceText ?? null,
      lastClicked: this.lastClicked,
      playsCount: this.playsCount,
      submitError: this.submitError,
    };
  }

  get grid(): PublicGrid {
    if (!this.task) throw new Error("no task loaded");
    return this.task.grid;
  }

  get bounds(): Bounds {
    return boundsFromArray(this.grid.bounds);
  }

  get referenceUrl(): string {
    if (!this.task) throw new Error("no task loaded");
    return this.task.referenceUrl;
  }

  async start(variant: number): Promise<void> {
    if (this.phase !== "idle") throw new Error(`cannot start in ${this.phase}`);
    this.phase = "loading";
    this.emit();
    const session = await this.api.createSession(variant);
    this.token = session.token;
    this.variant = session.variant;
    this.taskCount = session.taskCount;
    await this.loadTask(1);
  }

  private async loadTask(index: number): Promise<void> {
    if (!this.token) throw new Error("no session");
    this.phase = "loading";
    this.lastClicked = null;
    this.playsCount = 0;
    this.taskStart = null;
    this.submitError = null;
    this.emit();
    this.task = await this.api.getTask(this.token, index);
    // the timer starts only once the reference is actually playable
    await this.api.fetchReference(this.task.referenceUrl);
    this.taskStart = this.clock();
    this.phase = "task";
    this.emit();
  }

  /**
   * Register a click in latent coordinates (clamped to bounds) and
   * return the URL of the nearest lattice stimulus to play.
   */
  click(pt: Point): string {
    if (this.phase !== "task" || !this.task) {
      throw new Error("no task open for clicks");
    }
    const bounds = this.bounds;
    this.lastClicked = clampToBounds(bounds, pt);
    this.playsCount += 1;
    const { xi, yi } = nearestLatticeIndex(
      bounds,
      this.task.grid.resolution,
      this.lastClicked,
    );
    this.emit();
    return this.api.audioUrl(this.task.spaceText, xi, yi);
  }

  get canSubmit(): boolean {
    return this.phase === "task" && this.lastClicked !== null;
  }

  async submit(): Promise<void> {
    if (!this.canSubmit || !this.task || !this.token) {
      throw new Error("submit requires an open task with a click");
    }
    if (this.taskStart === null) throw new Error("reference never loaded");
    const clicked = this.lastClicked as Point;
    const payload = {
      taskIndex: this.task.taskIndex,
      x: clicked.x,
      y: clicked.y,
      durationMs: this.clock() - this.taskStart,
    };
    this.phase = "submitting";
    this.submitError = null;
    this.emit();
    try {
      await this.api.submitAnswer(this.token, payload);
    } catch (err) {
      // keep the click and timing; the participant can retry
      this.phase = "task";
      this.submitError = err instanceof Error ? err.message : String(err);
      this.emit();
      return;
    }
    if (this.task.taskIndex >= this.taskCount) {
      this.phase = "done";
      this.task = null;
      this.emit();
    } else {
      await this.loadTask(this.task.taskIndex + 1);
    }
  }
}
