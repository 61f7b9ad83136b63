// Thin typed wrappers over the experiment server's JSON API.
// The server is the only authority on tile colors; these types mirror
// its response schemas exactly and add nothing.

export type CellName = "covered" | "red" | "blue";

export interface GridView {
  board_index: number; // 1-based, for display
  total_boards: number;
  cells: CellName[]; // 49 entries, or [] once the session is done
  points: number;
  done: boolean;
}

export interface SessionStart {
  session_id: string;
  instructions: string;
  client_click_filter: boolean;
  grid_view: GridView;
}

export interface ClickResult {
  reward: number;
  color: CellName;
  done: boolean; // whole session finished
  board_done: boolean;
  points: number;
  next_board: GridView | null;
}

export interface CompleteResult {
  points: number;
  boards_solved: number;
}

export class ApiError extends Error {
  status: number;

  constructor(status: number, detail: string) {
    super(detail);
    this.status = status;
  }
}

async function request<T>(base: string, path: string, init?: RequestInit): Promise<T> {
  const res = await fetch(base + path, init);
  if (!res.ok) {
    let detail = res.statusText;
    try {
      const body = await res.json();
      if (body && typeof body.detail === "string") detail = body.detail;
    } catch {
      // non-JSON error body, keep the status text
    }
    throw new ApiError(res.status, detail);
  }
  return res.json() as Promise<T>;
}

export function createSession(base: string): Promise<SessionStart> {
  return request<SessionStart>(base, "/api/session", { method: "POST" });
}

export function getBoard(base: string, sessionId: string): Promise<GridView> {
  return request<GridView>(base, `/api/session/${sessionId}/board`);
}

export function sendClick(base: string, sessionId: string, tile: number): Promise<ClickResult> {
  return request<ClickResult>(base, `/api/session/${sessionId}/click`, {
    method: "POST",
    headers: { "Content-Type": "application/json" },
    body: JSON.stringify({ tile }),
  });
}

export function completeSession(base: string, sessionId: string): Promise<CompleteResult> {
  return request<CompleteResult>(base, `/api/session/${sessionId}/complete`, {
    method: "POST",
  });
}
