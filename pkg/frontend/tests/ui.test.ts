// @vitest-environment jsdom
import { beforeEach, describe, expect, it } from "vitest";

import { toScreen } from "../src/coords";
import { AppHandles, createApp } from "../src/ui";
import { FakeService } from "./fake-service";

const WIDTH = 560;
const HEIGHT = 360;

async function settle(): Promise<void> {
  // let chained promises from event handlers resolve
  for (let i = 0; i < 10; i++) await Promise.resolve();
}

function clickAt(handles: AppHandles, px: number, py: number): void {
  handles.space.dispatchEvent(
    new MouseEvent("click", { clientX: px, clientY: py, bubbles: true }),
  );
}

describe("experiment UI", () => {
  let service: FakeService;
  let handles: AppHandles;

  beforeEach(async () => {
    document.body.innerHTML = "<div id='app'></div>";
    service = new FakeService();
    handles = createApp(
      document.getElementById("app") as HTMLElement,
      service,
      { width: WIDTH, height: HEIGHT, variant: 1 },
    );
  });

  async function begin(): Promise<void> {
    handles.beginButton.click();
    await settle();
  }

  it("shows instructions before the session starts", () => {
    const items = document.querySelectorAll(".instructions li");
    expect(items.length).toBeGreaterThanOrEqual(5);
    expect(handles.root.querySelector(".stage")?.closest("[hidden]")).toBeNull;
  });

  it("renders 25 red anchor dots after starting", async () => {
    await begin();
    expect(document.querySelectorAll(".anchor")).toHaveLength(25);
    expect(handles.progress.textContent).toBe("task 1 of 15");
  });

  it("starts with the reference playing and submit disabled", async () => {
    await begin();
    expect(handles.audio.src).toContain("/reference");
    expect(handles.submitButton.disabled).toBe(true);
  });

  it("click selects a point, plays audio, and enables submit", async () => {
    await begin();
    clickAt(handles, WIDTH / 2, HEIGHT / 2);
    expect(handles.audio.src).toContain("/audio/");
    expect(handles.submitButton.disabled).toBe(false);
    const marker = document.querySelector(".marker") as HTMLElement;
    expect(marker.hidden).toBe(false);
  });

  it("center click maps to the bounds center", async () => {
    await begin();
    clickAt(handles, WIDTH / 2, HEIGHT / 2);
    const clicked = handles.controller.state.lastClicked!;
    const [xMin, xMax, yMin, yMax] = service.grid.bounds;
    expect(clicked.x).toBeCloseTo((xMin + xMax) / 2, 6);
    expect(clicked.y).toBeCloseTo((yMin + yMax) / 2, 6);
  });

  it("two clicks on the same spot replay the same stimulus", async () => {
    await begin();
    clickAt(handles, 100, 100);
    const first = handles.audio.src;
    clickAt(handles, 100, 100);
    expect(handles.audio.src).toBe(first);
    expect(handles.controller.state.playsCount).toBe(2);
  });

  it("anchor dots land where the grid says they should", async () => {
    await begin();
    const bounds = handles.controller.bounds;
    const expected = toScreen(bounds, { width: WIDTH, height: HEIGHT }, {
      x: service.grid.anchors[0][0][0],
      y: service.grid.anchors[0][0][1],
    });
    const lefts = Array.from(document.querySelectorAll(".anchor")).map(
      (dot) => parseFloat((dot as HTMLElement).style.left),
    );
    expect(lefts).toContain(expected.px - 4);
  });

  it("walks through all 15 tasks to the completion screen", async () => {
    await begin();
    for (let i = 1; i <= 15; i++) {
      expect(handles.progress.textContent).toBe(`task ${i} of 15`);
      clickAt(handles, 50 + i * 10, 200);
      handles.submitButton.click();
      await settle();
    }
    const done = document.querySelector(".done") as HTMLElement;
    expect(done.hidden).toBe(false);
    expect(service.log).toHaveLength(15);
  });

  it("shows a retry affordance when a submit fails", async () => {
    await begin();
    clickAt(handles, 100, 100);
    service.failNextSubmits = 1;
    handles.submitButton.click();
    await settle();
    expect(handles.status.textContent).toMatch(/retry/i);
    const retry = document.querySelector(".retry") as HTMLButtonElement;
    expect(retry.hidden).toBe(false);
    retry.click();
    await settle();
    expect(handles.progress.textContent).toBe("task 2 of 15");
    expect(service.log).toHaveLength(1);
  });
});
