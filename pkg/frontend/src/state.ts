// Session state machine. Pure functions over a plain object so the
// flow is testable without a DOM or a server. Points always come from
// the last server response; the client never does its own arithmetic.

import type { ClickResult, GridView } from "./api.js";

export type Phase = "instructions" | "playing" | "finished";

export interface FlowState {
  phase: Phase;
  sessionId: string;
  instructions: string;
  clickFilter: boolean; // refuse clicks on revealed tiles client-side
  view: GridView;
  busy: boolean; // a click is in flight
  flash: string | null; // transient message after a board completes
}

export function initialState(
  sessionId: string,
  instructions: string,
  clickFilter: boolean,
  view: GridView,
): FlowState {
  return {
    phase: "instructions",
    sessionId,
    instructions,
    clickFilter,
    view,
    busy: false,
    flash: null,
  };
}

export function startPlaying(state: FlowState): FlowState {
  return { ...state, phase: "playing", flash: null };
}

/** Whether a click on this tile should reach the server at all. */
export function shouldSendClick(state: FlowState, tile: number): boolean {
  if (state.phase !== "playing" || state.busy) return false;
  if (!Number.isInteger(tile) || tile < 0 || tile >= 49) return false;
  if (state.clickFilter && state.view.cells[tile] !== "covered") return false;
  return true;
}

export function beginClick(state: FlowState): FlowState {
  return { ...state, busy: true };
}

/** Fold a click response into the state. The server already advanced
 * past any boards that were solved on reveal, so next_board is always
 * the next playable view (or null when the run is over). */
export function applyClick(state: FlowState, tile: number, result: ClickResult): FlowState {
  if (result.done) {
    return {
      ...state,
      phase: "finished",
      busy: false,
      flash: null,
      view: { ...state.view, cells: [], points: result.points, done: true },
    };
  }
  if (result.board_done && result.next_board) {
    return {
      ...state,
      busy: false,
      flash: `Board ${state.view.board_index} complete`,
      view: result.next_board,
    };
  }
  const cells = state.view.cells.slice();
  cells[tile] = result.color;
  return {
    ...state,
    busy: false,
    flash: null,
    view: { ...state.view, cells, points: result.points },
  };
}

/** A failed request must leave the board exactly as it was. */
export function clickFailed(state: FlowState): FlowState {
  return { ...state, busy: false };
}

export function resumeWith(state: FlowState, view: GridView): FlowState {
  return {
    ...state,
    phase: view.done ? "finished" : "playing",
    busy: false,
    view,
  };
}
