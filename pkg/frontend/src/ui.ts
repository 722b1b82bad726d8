/**
 * DOM layer: renders the experiment rectangle with its 25 red anchor
 * dots, plays audio on click, and forwards submits to the session
 * controller. Everything is plain DOM so the same code runs in a real
 * browser and under jsdom in tests.
 */

import type { ExperimentClient } from "./api";
import { Point, toLatent, toScreen } from "./coords";
import { SessionController } from "./session";

export interface UiOptions {
  width?: number;
  height?: number;
  variant?: number;
}

export interface AppHandles {
  controller: SessionController;
  root: HTMLElement;
  space: HTMLElement;
  submitButton: HTMLButtonElement;
  beginButton: HTMLButtonElement;
  progress: HTMLElement;
  status: HTMLElement;
  audio: HTMLAudioElement;
}

const INSTRUCTIONS = [
  "Listen to the reference sample as many times as you like.",
  "Click anywhere on the 2-D space to hear the sample at that point.",
  "The red points are the possible positions of the reference.",
  "You can click as much as you like and replay any sample.",
  "When you are satisfied with your choice, click on submit.",
  "Your progress through the 15 tasks is shown on the page.",
];

function el<K extends keyof HTMLElementTagNameMap>(
  doc: Document,
  tag: K,
  className?: string,
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = doc.createElement(tag);
  if (className) node.className = className;
  if (text) node.textContent = text;
  return node;
}

/** Play without crashing where HTMLMediaElement.play is unimplemented. */
function safePlay(audio: HTMLAudioElement): void {
  try {
    const p = audio.play();
    if (p && typeof p.catch === "function") p.catch(() => undefined);
  } catch {
    /* jsdom */
  }
}

export function createApp(
  root: HTMLElement,
  api: ExperimentClient,
  options: UiOptions = {},
): AppHandles {
  const doc = root.ownerDocument;
  const width = options.width ?? 560;
  const height = options.height ?? 360;
  const variant = options.variant ?? 1;
  const controller = new SessionController(api);

  const intro = el(doc, "div", "intro");
  const list = el(doc, "ul", "instructions");
  for (const line of INSTRUCTIONS) list.appendChild(el(doc, "li", "", line));
  intro.appendChild(list);
  const beginButton = el(doc, "button", "begin", "Begin");
  intro.appendChild(beginButton);

  const stage = el(doc, "div", "stage");
  stage.hidden = true;
  const progress = el(doc, "div", "progress");
  const status = el(doc, "div", "status");
  const space = el(doc, "div", "space");
  space.style.position = "relative";
  space.style.width = `${width}px`;
  space.style.height = `${height}px`;
  const marker = el(doc, "div", "marker selection");
  marker.hidden = true;
  const audio = el(doc, "audio");
  audio.setAttribute("controls", "");
  const replayButton = el(doc, "button", "replay", "Replay reference");
  const submitButton = el(doc, "button", "submit", "Submit");
  submitButton.disabled = true;
  const retryButton = el(doc, "button", "retry", "Retry submit");
  retryButton.hidden = true;

  stage.append(progress, space, audio, replayButton, submitButton,
    retryButton, status);
  const doneScreen = el(doc, "div", "done",
    "All 15 tasks complete — thank you!");
  doneScreen.hidden = true;
  root.append(intro, stage, doneScreen);

  const viewport = { width, height };

  function renderAnchors(): void {
    for (const stale of Array.from(space.querySelectorAll(".anchor"))) {
      stale.remove();
    }
    const bounds = controller.bounds;
    for (const row of controller.grid.anchors) {
      for (const [x, y] of row) {
        const dot = el(doc, "div", "anchor");
        const { px, py } = toScreen(bounds, viewport, { x, y });
        dot.style.position = "absolute";
        dot.style.left = `${px - 4}px`;
        dot.style.top = `${py - 4}px`;
        dot.style.width = "8px";
        dot.style.height = "8px";
        dot.style.borderRadius = "50%";
        dot.style.background = "red";
        space.appendChild(dot);
      }
    }
    if (!space.contains(marker)) space.appendChild(marker);
  }

  function playUrl(url: string): void {
    audio.src = url;
    safePlay(audio);
  }

  controller.onChange((state) => {
    intro.hidden = state.phase !== "idle";
    stage.hidden = state.phase === "idle" || state.phase === "done";
    doneScreen.hidden = state.phase !== "done";
    submitButton.disabled = !controller.canSubmit;
    retryButton.hidden = state.submitError === null;
    status.textContent = state.submitError
      ? `Submit failed (${state.submitError}) — please retry.`
      : state.phase === "loading"
        ? "Loading…"
        : "";
    if (state.phase === "task") {
      progress.textContent = `task ${state.taskIndex} of ${state.taskCount}`;
      renderAnchors();
      if (state.lastClicked) {
        const { px, py } = toScreen(controller.bounds, viewport,
          state.lastClicked);
        marker.style.position = "absolute";
        marker.style.left = `${px - 5}px`;
        marker.style.top = `${py - 5}px`;
        marker.hidden = false;
      } else {
        marker.hidden = true;
      }
    }
  });

  beginButton.addEventListener("click", () => {
    void controller.start(variant).then(() => playUrl(controller.referenceUrl));
  });

  space.addEventListener("click", (event) => {
    if (controller.state.phase !== "task") return;
    const rect = space.getBoundingClientRect();
    const pixel = {
      px: (event as MouseEvent).clientX - rect.left,
      py: (event as MouseEvent).clientY - rect.top,
    };
    const latent: Point = toLatent(controller.bounds, viewport, pixel);
    playUrl(controller.click(latent));
  });

  replayButton.addEventListener("click", () => {
    if (controller.state.phase === "task") playUrl(controller.referenceUrl);
  });

  const doSubmit = () => {
    if (!controller.canSubmit) return;
    void controller.submit().then(() => {
      if (controller.state.phase === "task") playUrl(controller.referenceUrl);
    });
  };
  submitButton.addEventListener("click", doSubmit);
  retryButton.addEventListener("click", doSubmit);

  return {
    controller, root, space, submitButton, beginButton, progress, status, audio,
  };
}
