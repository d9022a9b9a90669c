import type { AlarmPayload, StreamEvent, ViewPayload } from "./types.js";

export type Connection = "connecting" | "live" | "reconnecting";

export interface UiState {
  connection: Connection;
  sessionId: string | null;
  view: ViewPayload | null;
  alarms: AlarmPayload[]; // open alarms, oldest first
  dismissedAutoSeq: number | null; // banner hidden locally for this auto step
  busy: boolean; // a command is in flight; buttons disabled
  error: string | null; // last service error, shown inline
  stale: boolean; // a gap event arrived; waiting for a refetch
}

export function initialState(): UiState {
  return {
    connection: "connecting",
    sessionId: null,
    view: null,
    alarms: [],
    dismissedAutoSeq: null,
    busy: false,
    error: null,
    stale: false,
  };
}

/** The undo banner is visible iff the latest view carries an automated step
 * the operator has not locally dismissed. */
export function undoBanner(state: UiState): Record<string, any> | null {
  const pending = state.view?.pending_auto ?? null;
  if (pending === null) return null;
  if (state.dismissedAutoSeq !== null && pending.seq === state.dismissedAutoSeq) return null;
  return pending;
}

export function setSession(state: UiState, sessionId: string, view: ViewPayload): UiState {
  return { ...state, sessionId, view, error: null, stale: false };
}

/** Replace the whole view: every rendered value comes from this payload alone. */
export function setView(state: UiState, view: ViewPayload): UiState {
  return { ...state, view, stale: false };
}

export function setAlarms(state: UiState, alarms: AlarmPayload[]): UiState {
  return { ...state, alarms: alarms.filter((a) => a.state === "open") };
}

export function applyEvent(state: UiState, event: StreamEvent): UiState {
  switch (event.event) {
    case "view":
      if (event.session_id !== state.sessionId || !event.view) return state;
      return setView(state, event.view);
    case "alarm":
      if (!event.alarm) return state;
      return { ...state, alarms: [...state.alarms, event.alarm] };
    case "alarm_resolved":
      if (!event.alarm) return state;
      return { ...state, alarms: state.alarms.filter((a) => a.id !== event.alarm!.id) };
    case "gap":
      // events were lost; flag it so the owner refetches the view
      return { ...state, stale: true };
    default:
      return state; // vitals ride along inside view payloads
  }
}
