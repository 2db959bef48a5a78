import { describe, expect, test } from "vitest";

import { CommandComposer, PEN_F_LIM, PEN_VEL, ROTATE_VEL, SWEEP_VEL,
         SEND_MIN_INTERVAL_MS } from "../src/input";

describe("command composer", () => {
  test("no input sends nothing", () => {
    const composer = new CommandComposer();
    expect(composer.poll(0)).toBeNull();
    expect(composer.poll(1000)).toBeNull();
  });

  test("scripted keypress sequence produces the exact command frames", () => {
    const composer = new CommandComposer();
    const frames: number[][] = [];
    const script: [string, number][] = [
      ["ArrowDown", 100], ["ArrowDown", 200], ["ArrowRight", 300],
      ["q", 400], ["ArrowDown", 500],
    ];
    for (const [key, t] of script) {
      composer.keyPress(key);
      const frame = composer.poll(t);
      if (frame) {
        frames.push(frame);
      }
    }
    expect(frames).toEqual([
      [0, 0, 0, 0, 0, 0, -0.1, 0],
      [0, 0, 0, 0, 0, 0, -0.2, 0],
      [0.1, 0, 0, 0, 0, 0, -0.2, 0],
      [0.1, 0, 0, -0.1, 0, 0, -0.2, 0],
      [0.1, 0, 0, -0.1, 0, 0, -0.30000000000000004, 0],
    ]);
  });

  test("velocity nudges saturate at the box bounds", () => {
    const composer = new CommandComposer();
    for (let i = 0; i < 30; i++) {
      composer.keyPress("ArrowDown");
    }
    expect(composer.current()[PEN_VEL]).toBe(-1);
  });

  test("slider at maximum maps the component to +1", () => {
    const composer = new CommandComposer();
    composer.slider({ index: PEN_F_LIM, value: 1 });
    const frame = composer.poll(100);
    expect(frame).not.toBeNull();
    expect(frame![PEN_F_LIM]).toBe(1);
  });

  test("rate limit holds sends to 20 Hz, unchanged commands stay silent", () => {
    const composer = new CommandComposer();
    composer.keyPress("ArrowRight");
    expect(composer.poll(0)).not.toBeNull();
    composer.keyPress("ArrowRight");
    expect(composer.poll(SEND_MIN_INTERVAL_MS - 1)).toBeNull();
    expect(composer.poll(SEND_MIN_INTERVAL_MS)).not.toBeNull();
    expect(composer.poll(SEND_MIN_INTERVAL_MS * 2)).toBeNull();
  });

  test("zeroVelocities clears only the velocity components", () => {
    const composer = new CommandComposer();
    composer.keyPress("ArrowRight");
    composer.keyPress("e");
    composer.keyPress("ArrowDown");
    composer.slider({ index: PEN_F_LIM, value: 0.6 });
    composer.poll(0);
    composer.zeroVelocities();
    const frame = composer.poll(1000)!;
    expect(frame[SWEEP_VEL]).toBe(0);
    expect(frame[ROTATE_VEL]).toBe(0);
    expect(frame[PEN_VEL]).toBe(0);
    expect(frame[PEN_F_LIM]).toBe(0.6);
  });

  test("every emitted frame is inside the unit box", () => {
    const composer = new CommandComposer();
    const keys = ["ArrowDown", "ArrowUp", "q", "e", "ArrowLeft", "ArrowRight"];
    for (let i = 0; i < 200; i++) {
      composer.keyPress(keys[i % keys.length]);
      composer.slider({ index: (i % 5) + 1, value: (i % 7) - 3 });
      const frame = composer.poll(i * 100);
      if (frame) {
        for (const v of frame) {
          expect(Math.abs(v)).toBeLessThanOrEqual(1);
        }
      }
    }
  });
});
