import { ENTITY_TYPES, type Selection } from "./types.js";

/**
 * Keyboard-first labeling: digits 1-9 pick the nine entity types in
 * display order, 0 picks non-entity, Enter submits, n skips to the next
 * candidate without deciding.
 */
export type KeyAction =
  | { kind: "select"; selection: Selection }
  | { kind: "submit" }
  | { kind: "next" }
  | { kind: "none" };

export function actionForKey(key: string): KeyAction {
  if (key >= "1" && key <= "9") {
    const entityType = ENTITY_TYPES[Number(key) - 1];
    if (entityType === undefined) return { kind: "none" };
    return { kind: "select", selection: { decision: "entity", entityType } };
  }
  if (key === "0") {
    return { kind: "select", selection: { decision: "non-entity" } };
  }
  if (key === "Enter") return { kind: "submit" };
  if (key === "n") return { kind: "next" };
  return { kind: "none" };
}

/** Legend rendered under the document: key -> label. */
export function shortcutLegend(): Array<{ key: string; label: string }> {
  const legend: Array<{ key: string; label: string }> = ENTITY_TYPES.map(
    (code, i) => ({ key: String(i + 1), label: code }),
  );
  legend.push({ key: "0", label: "non-entity" });
  legend.push({ key: "Enter", label: "submit" });
  return legend;
}
