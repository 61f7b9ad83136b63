// HTML producers. Everything the page shows goes through these string
// builders, which makes "the DOM never leaks a covered tile's color"
// checkable by inspecting their output directly.

import type { GridView } from "./api.js";
import type { FlowState } from "./state.js";

function escapeHtml(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

export function renderInstructions(instructions: string): string {
  return (
    `<div class="instructions">` +
    `<p>${escapeHtml(instructions)}</p>` +
    `<button id="start" class="primary">Start</button>` +
    `</div>`
  );
}

export function renderGrid(view: GridView): string {
  const cells = view.cells
    .map((cell, i) => {
      // A covered cell gets no color information of any kind.
      const cls = cell === "covered" ? "cell covered" : `cell revealed ${cell}`;
      return `<button class="${cls}" data-tile="${i}" aria-label="tile ${i}"></button>`;
    })
    .join("");
  return `<div class="grid" role="grid">${cells}</div>`;
}

export function renderStatus(view: GridView, flash: string | null): string {
  const progress = `Board ${view.board_index} of ${view.total_boards}`;
  const points = `Points: ${view.points}`;
  const note = flash ? `<span class="flash">${escapeHtml(flash)}</span>` : "";
  return `<div class="status"><span>${progress}</span><span id="points">${points}</span>${note}</div>`;
}

export function renderComplete(points: number): string {
  return (
    `<div class="complete">` +
    `<h2>All boards complete</h2>` +
    `<p>Final score: <span id="points">${points}</span> points. Thank you!</p>` +
    `</div>`
  );
}

export function renderError(message: string): string {
  return `<div class="toast" role="alert">${escapeHtml(message)}</div>`;
}

export function renderApp(state: FlowState): string {
  if (state.phase === "instructions") return renderInstructions(state.instructions);
  if (state.phase === "finished") return renderComplete(state.view.points);
  return renderStatus(state.view, state.flash) + renderGrid(state.view);
}
