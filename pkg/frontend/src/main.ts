import { ServiceClient } from "./api.js";
import { makeActions, refetch, type Store } from "./controller.js";
import { EventStream } from "./events.js";
import { render } from "./render.js";
import { applyEvent, initialState, setSession, type UiState } from "./viewmodel.js";

const root = document.getElementById("app") as HTMLElement;
const client = new ServiceClient("");

let state: UiState = initialState();
const store: Store = {
  get: () => state,
  set(next) {
    state = next;
    render(root, state, actions);
  },
};
const actions = makeActions(client, store);

async function boot() {
  render(root, state, actions);
  const { graphs } = await client.listGraphs();
  if (!graphs.length) {
    root.textContent = "no graphs loaded";
    return;
  }
  const created = await client.createSession(graphs[0].id);
  store.set(setSession(state, created.session_id, created.view));

  const stream = new EventStream("/events", {
    onEvent: (event) => {
      store.set(applyEvent(state, event));
      if (state.stale) refetch(client, store).catch(() => {});
    },
    onConnect: () => {
      store.set({ ...state, connection: "live" });
      refetch(client, store).catch(() => {});
    },
    onDisconnect: () => store.set({ ...state, connection: "reconnecting" }),
  });
  stream.start();
}

boot().catch((err) => {
  root.textContent = `failed to start: ${err}`;
});
