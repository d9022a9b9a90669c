import { ServiceClient, ServiceError } from "./api.js";
import type { Actions } from "./render.js";
import { setAlarms, setView, type UiState } from "./viewmodel.js";

export interface Store {
  get(): UiState;
  set(next: UiState): void;
}

/** Wire buttons to service calls: optimistic disable while in flight, state
 * re-derived only from what the service answers. A press while busy is a
 * no-op, so one tap is one request. */
export function makeActions(client: ServiceClient, store: Store): Actions {
  async function command(run: () => Promise<Record<string, any>>) {
    if (store.get().busy) return;
    store.set({ ...store.get(), busy: true, error: null });
    try {
      const res = await run();
      let next: UiState = { ...store.get(), busy: false };
      if (res.view) next = setView(next, res.view);
      store.set(next);
    } catch (err) {
      const detail = err instanceof ServiceError ? err.message : String(err);
      store.set({ ...store.get(), busy: false, error: detail });
    }
  }

  return {
    advance: (choice) => void command(() => client.advance(store.get().sessionId!, choice)),
    undo: () => void command(() => client.undo(store.get().sessionId!)),
    verdict: (kind, accept) =>
      void command(() => client.verdict(store.get().sessionId!, kind, accept)),
    alarmVerdict: (id, decision) => void command(() => client.alarmVerdict(id, decision)),
    dismissBanner: () => {
      const pending = store.get().view?.pending_auto;
      if (pending) store.set({ ...store.get(), dismissedAutoSeq: pending.seq });
    },
  };
}

export async function refetch(client: ServiceClient, store: Store): Promise<void> {
  const sessionId = store.get().sessionId;
  if (!sessionId) return;
  const [viewRes, alarmRes] = await Promise.all([
    client.getView(sessionId),
    client.listAlarms("open"),
  ]);
  store.set(setAlarms(setView(store.get(), viewRes.view), alarmRes.alarms));
}
