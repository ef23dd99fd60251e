/** Client view state: active tool, brush, playback, catalog. */

export type Tool = "obstacle" | "erase_obstacle" | "erase" | "spawn" | "attractor";

export interface ViewState {
  session: string | null;
  tool: Tool;
  brushRadius: number;
  stepsPerSecond: number;
  catalog: string[];
  selectedParams: string | null;
  paused: boolean;
}

export function initialViewState(): ViewState {
  return {
    session: null,
    tool: "obstacle",
    brushRadius: 10,
    stepsPerSecond: 20,
    catalog: [],
    selectedParams: null,
    paused: false,
  };
}

/** Exactly one active tool; brush radius at least one cell. */
export function setTool(state: ViewState, tool: Tool): ViewState {
  return { ...state, tool };
}

export function setBrushRadius(state: ViewState, radius: number): ViewState {
  return { ...state, brushRadius: Math.max(1, Math.round(radius)) };
}
