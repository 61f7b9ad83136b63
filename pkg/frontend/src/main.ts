// Page wiring: one root element, response-driven state updates, a
// single in-flight request at a time. Refreshing mid-run resumes the
// same session through the board endpoint.

import { ApiError, createSession, getBoard, sendClick } from "./api.js";
import {
  FlowState,
  applyClick,
  beginClick,
  clickFailed,
  initialState,
  resumeWith,
  shouldSendClick,
  startPlaying,
} from "./state.js";
import { renderApp, renderError } from "./render.js";

const SESSION_KEY = "tilemeta-session";
const base = window.location.origin;

let state: FlowState | null = null;
let root: HTMLElement;

function draw(): void {
  if (state) root.innerHTML = renderApp(state);
}

function toast(message: string): void {
  const holder = document.createElement("div");
  holder.innerHTML = renderError(message);
  document.body.appendChild(holder.firstElementChild as Element);
  setTimeout(() => document.querySelector(".toast")?.remove(), 4000);
}

async function boot(): Promise<void> {
  const saved = sessionStorage.getItem(SESSION_KEY);
  if (saved) {
    const parsed = JSON.parse(saved) as { id: string; instructions: string; filter: boolean };
    try {
      const view = await getBoard(base, parsed.id);
      state = resumeWith(
        initialState(parsed.id, parsed.instructions, parsed.filter, view),
        view,
      );
      draw();
      return;
    } catch {
      sessionStorage.removeItem(SESSION_KEY); // expired or gone, start fresh
    }
  }
  try {
    const started = await createSession(base);
    sessionStorage.setItem(
      SESSION_KEY,
      JSON.stringify({
        id: started.session_id,
        instructions: started.instructions,
        filter: started.client_click_filter,
      }),
    );
    state = initialState(
      started.session_id,
      started.instructions,
      started.client_click_filter,
      started.grid_view,
    );
    draw();
  } catch {
    root.innerHTML =
      `<div class="instructions"><p>Could not reach the server.</p>` +
      `<button id="retry" class="primary">Retry</button></div>`;
  }
}

async function handleTileClick(tile: number): Promise<void> {
  if (!state || !shouldSendClick(state, tile)) return;
  state = beginClick(state);
  try {
    const result = await sendClick(base, state.sessionId, tile);
    state = applyClick(state, tile, result);
    draw();
    // done means the server already closed the session out
    if (state.phase === "finished") sessionStorage.removeItem(SESSION_KEY);
  } catch (err) {
    state = clickFailed(state);
    draw();
    toast(err instanceof ApiError ? err.message : "Network error, try again");
  }
}

function onRootClick(event: Event): void {
  const target = event.target as HTMLElement;
  if (target.id === "start" && state) {
    state = startPlaying(state);
    draw();
    return;
  }
  if (target.id === "retry") {
    void boot();
    return;
  }
  const tileAttr = target.getAttribute("data-tile");
  if (tileAttr !== null) void handleTileClick(Number(tileAttr));
}

document.addEventListener("DOMContentLoaded", () => {
  root = document.getElementById("app") as HTMLElement;
  root.addEventListener("click", onRootClick);
  void boot();
});
