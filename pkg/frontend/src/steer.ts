/** Keyboard steering: key names to action kinds. */

import type { ActionKind } from "./protocol.js";

export const KEY_ACTIONS: Record<string, ActionKind> = {
  ArrowUp: "MoveForward",
  ArrowLeft: "TurnLeft",
  ArrowRight: "TurnRight",
  " ": "NoOp",
};

/**
 * Action for a key press, or null when the key is unbound or the world's
 * action space does not include the mapped kind.
 */
export function keyToAction(
  key: string,
  actionSpace: readonly string[],
): ActionKind | null {
  const kind = KEY_ACTIONS[key];
  if (kind === undefined || !actionSpace.includes(kind)) return null;
  return kind;
}
