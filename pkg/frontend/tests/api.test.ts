import { beforeEach, describe, expect, it, vi } from "vitest";

import { ApiRequestError, getRun, getTuples, listRuns, submitLabel } from "../src/api.js";
import { MockServer, fixture } from "./mockServer.js";

describe("api client", () => {
  let server: MockServer;

  beforeEach(() => {
    server = new MockServer();
    vi.stubGlobal("fetch", server.fetch);
  });

  it("lists runs with totals", async () => {
    const runs = await listRuns();
    expect(runs.map((r) => r.run_id)).toEqual(["run-agg", "run-ehr"]);
    expect(runs[1].totals.tuples_in).toBeGreaterThan(0);
  });

  it("maps API errors to typed exceptions", async () => {
    const failure = await getRun("nope").then(
      () => null,
      (err) => err as ApiRequestError,
    );
    expect(failure).toBeInstanceOf(ApiRequestError);
    expect(failure!.status).toBe(404);
    expect(failure!.code).toBe("not_found");
  });

  it("filters flagged tuples server-side", async () => {
    const flagged = await getTuples("run-ehr", true);
    expect(flagged.length).toBeGreaterThan(0);
    expect(flagged.every((r) => r._flags.length > 0)).toBe(true);
  });

  it("submit label is write-once", async () => {
    const inv = fixture.label_tasks[0].invocation_id;
    await submitLabel(inv, true);
    await expect(submitLabel(inv, false)).rejects.toMatchObject({ status: 409 });
  });
});
