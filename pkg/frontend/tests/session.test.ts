import { beforeEach, describe, expect, it } from "vitest";

import { SessionController } from "../src/session";
import { FakeService } from "./fake-service";

function makeClock(start = 1000) {
  let t = start;
  const clock = () => t;
  return { clock, advance: (ms: number) => (t += ms) };
}

describe("session flow", () => {
  let service: FakeService;
  let clock: ReturnType<typeof makeClock>;
  let controller: SessionController;

  beforeEach(async () => {
    service = new FakeService();
    clock = makeClock();
    controller = new SessionController(service, clock.clock);
    await controller.start(1);
  });

  it("opens on task 1 with the reference fetched", () => {
    expect(controller.state.phase).toBe("task");
    expect(controller.state.taskIndex).toBe(1);
    expect(service.referenceFetches).toBe(1);
  });

  it("refuses to submit before any click", async () => {
    expect(controller.canSubmit).toBe(false);
    await expect(controller.submit()).rejects.toThrow(/requires/);
  });

  it("click returns the nearest-lattice stimulus URL", () => {
    // bounds x: [-2, 6], res 20 -> lattice step 8/19; x=-2 is xi=0
    const url = controller.click({ x: -2, y: -1 });
    expect(url).toBe("/audio/1/0/0");
    expect(controller.state.playsCount).toBe(1);
  });

  it("clamps out-of-bounds clicks to the boundary", () => {
    controller.click({ x: 999, y: -999 });
    expect(controller.state.lastClicked).toEqual({ x: 6, y: -1 });
  });

  it("measures duration from reference-ready to submit", async () => {
    controller.click({ x: 0, y: 0 });
    clock.advance(4321);
    await controller.submit();
    expect(service.log[0].durationMs).toBe(4321);
  });

  it("advances through all 15 tasks to the completion state", async () => {
    for (let i = 1; i <= 15; i++) {
      expect(controller.state.taskIndex).toBe(i);
      controller.click({ x: 1, y: 1 });
      clock.advance(100);
      await controller.submit();
    }
    expect(controller.state.phase).toBe("done");
    expect(service.log).toHaveLength(15);
    const received = service.log.map((row) => row.receivedAt);
    expect(received).toEqual([...received].sort((a, b) => a - b));
  });

  it("keeps the answer and retries after a network failure", async () => {
    controller.click({ x: 2, y: 2 });
    service.failNextSubmits = 1;
    await controller.submit();
    expect(controller.state.phase).toBe("task");
    expect(controller.state.submitError).toMatch(/network/);
    expect(controller.state.lastClicked).toEqual({ x: 2, y: 2 });
    await controller.submit(); // retry succeeds
    expect(controller.state.taskIndex).toBe(2);
    expect(service.log).toHaveLength(1);
  });

  it("ack-loss retry is idempotent under last-write-wins", async () => {
    controller.click({ x: 2, y: 2 });
    await controller.submit();
    // simulate a lost ack: resubmit task 1 directly against the service
    await service.submitAnswer(controller.state.token as string, {
      taskIndex: 1,
      x: 2,
      y: 2,
      durationMs: 50,
    });
    expect(service.log).toHaveLength(2);
    expect(service.effectiveLog()).toHaveLength(1);
  });

  it("resets click state between tasks", async () => {
    controller.click({ x: 1, y: 1 });
    controller.click({ x: 1, y: 1 });
    expect(controller.state.playsCount).toBe(2);
    await controller.submit();
    expect(controller.state.playsCount).toBe(0);
    expect(controller.state.lastClicked).toBeNull();
    expect(controller.canSubmit).toBe(false);
  });
});

describe("start guards", () => {
  it("cannot start twice", async () => {
    const controller = new SessionController(new FakeService());
    await controller.start(1);
    await expect(controller.start(1)).rejects.toThrow(/cannot start/);
  });
});
