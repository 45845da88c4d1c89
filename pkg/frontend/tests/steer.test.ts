import { describe, expect, it } from "vitest";
import { keyToAction } from "../src/steer.js";

const FULL = ["MoveForward", "TurnLeft", "TurnRight", "Collect", "Drop", "NoOp"];

describe("keyToAction", () => {
  it("maps the steering keys", () => {
    expect(keyToAction("ArrowUp", FULL)).toBe("MoveForward");
    expect(keyToAction("ArrowLeft", FULL)).toBe("TurnLeft");
    expect(keyToAction("ArrowRight", FULL)).toBe("TurnRight");
    expect(keyToAction(" ", FULL)).toBe("NoOp");
  });

  it("ignores unbound keys", () => {
    expect(keyToAction("a", FULL)).toBeNull();
    expect(keyToAction("ArrowDown", FULL)).toBeNull();
    expect(keyToAction("Enter", FULL)).toBeNull();
  });

  it("space steers only when the world's action space has NoOp", () => {
    const noWait = ["MoveForward", "TurnLeft", "TurnRight", "Collect"];
    expect(keyToAction(" ", noWait)).toBeNull();
    expect(keyToAction("ArrowUp", noWait)).toBe("MoveForward");
  });
});
