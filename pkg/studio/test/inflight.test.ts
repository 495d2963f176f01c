import { describe, expect, it } from "vitest";

import { LatestWins } from "../src/inflight.js";

function deferred<T>() {
  let resolve!: (v: T) => void;
  let reject!: (e: unknown) => void;
  const promise = new Promise<T>((res, rej) => {
    resolve = res;
    reject = rej;
  });
  return { promise, resolve, reject };
}

describe("latest-wins preview requests", () => {
  it("aborts the previous request when a new one starts", async () => {
    const flight = new LatestWins();
    const aborted: boolean[] = [];
    const first = flight.run(async (signal) => {
      await new Promise((res) => setTimeout(res, 20));
      aborted.push(signal.aborted);
      return "first";
    });
    const second = flight.run(async () => "second");
    expect(await second).toBe("second");
    expect(await first).toBeNull(); // superseded, never surfaces
    expect(aborted).toEqual([true]);
  });

  it("resolves normally when uncontested", async () => {
    const flight = new LatestWins();
    expect(await flight.run(async () => 7)).toBe(7);
  });

  it("swallows abort-induced rejections of stale requests", async () => {
    const flight = new LatestWins();
    const gate = deferred<string>();
    const first = flight.run(async (signal) => {
      signal.addEventListener("abort", () => gate.reject(new Error("aborted")));
      return gate.promise;
    });
    const second = flight.run(async () => "fresh");
    expect(await second).toBe("fresh");
    expect(await first).toBeNull();
  });

  it("propagates real errors from the current request", async () => {
    const flight = new LatestWins();
    await expect(
      flight.run(async () => {
        throw new Error("boom");
      }),
    ).rejects.toThrow("boom");
  });
});
