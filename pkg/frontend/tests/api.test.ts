import { beforeEach, describe, expect, it, vi } from "vitest";

import { ServiceClient, ServiceError } from "../src/api.js";

function stubFetch(status: number, body: any) {
  const impl = vi.fn(async () => ({
    ok: status >= 200 && status < 300,
    status,
    statusText: "x",
    json: async () => body,
  }));
  vi.stubGlobal("fetch", impl);
  return impl;
}

beforeEach(() => vi.restoreAllMocks());

describe("service client", () => {
  it("posts the advance choice as JSON", async () => {
    const impl = stubFetch(200, { view: {} });
    await new ServiceClient("http://x").advance("s1", "yes");
    expect(impl).toHaveBeenCalledWith("http://x/sessions/s1/advance", {
      method: "POST",
      body: JSON.stringify({ choice: "yes" }),
    });
  });

  it("turns error bodies into typed errors", async () => {
    stubFetch(409, { error: "nothing_to_undo", detail: "history is empty" });
    const err = await new ServiceClient("").undo("s1").catch((e) => e);
    expect(err).toBeInstanceOf(ServiceError);
    expect(err.status).toBe(409);
    expect(err.code).toBe("nothing_to_undo");
    expect(err.message).toContain("history is empty");
  });

  it("survives an error response without a JSON body", async () => {
    const impl = vi.fn(async () => ({
      ok: false,
      status: 500,
      statusText: "boom",
      json: async () => {
        throw new SyntaxError("empty");
      },
    }));
    vi.stubGlobal("fetch", impl);
    const err = await new ServiceClient("").listGraphs().catch((e) => e);
    expect(err).toBeInstanceOf(ServiceError);
    expect(err.detail).toBe("boom");
  });

  it("filters the alarm listing by state", async () => {
    const impl = stubFetch(200, { alarms: [] });
    await new ServiceClient("").listAlarms("open");
    expect(impl).toHaveBeenCalledWith("/alarms?state=open", {
      method: "GET",
      body: undefined,
    });
  });
});
