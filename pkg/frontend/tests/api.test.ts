import { describe, expect, it } from "vitest";

import { ApiError, encodeImagePath } from "../src/api.js";
import { makeClient, StubServer } from "./helpers.js";

describe("encodeImagePath", () => {
  it("keeps slashes as path separators and escapes the rest", () => {
    expect(encodeImagePath("box 1/page#0.png")).toBe("box%201/page%230.png");
    expect(encodeImagePath("plain.png")).toBe("plain.png");
  });
});

describe("ApiClient", () => {
  it("puts labels at the slash-preserving image path", async () => {
    const server = new StubServer().on("PUT", /\/label$/, () => ({ status: 204 }));
    await makeClient(server).putLabel("box 1/page-0.png", "negative");
    expect(server.calls).toHaveLength(1);
    const call = server.calls[0]!;
    expect(call.url).toBe("/api/v1/images/box%201/page-0.png/label");
    expect(call.body).toEqual({ label: "negative" });
  });

  it("raises ApiError carrying the envelope fields", async () => {
    const server = new StubServer().on("GET", /\/jobs\//, () => ({
      status: 404,
      body: { status: 404, code: "not-found", message: "no such job: 'nope'" },
    }));
    const failure = await makeClient(server)
      .getJob("nope")
      .then(
        () => null,
        (error: unknown) => error,
      );
    expect(failure).toBeInstanceOf(ApiError);
    const apiError = failure as ApiError;
    expect(apiError.status).toBe(404);
    expect(apiError.code).toBe("not-found");
    expect(apiError.message).toContain("nope");
  });

  it("serializes evaluation cutoffs as one comma-separated parameter", async () => {
    const server = new StubServer().on("GET", /\/evaluations\?/, () => ({
      body: { dataset: "", n: 0, positives: 0, table: [] },
    }));
    await makeClient(server).getEvaluations([0.1, 0.5, 0.99]);
    expect(server.calls[0]!.url).toBe("/api/v1/evaluations?cutoffs=0.1%2C0.5%2C0.99");
  });

  it("treats 204 as a void result", async () => {
    const server = new StubServer().on("PUT", /\/label$/, () => ({ status: 204 }));
    await expect(makeClient(server).putLabel("a.png", "positive")).resolves.toBeUndefined();
  });
});
