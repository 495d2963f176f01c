/**
 * Typed client for the preview service. The fetch implementation is
 * injected so logic tests run without a browser or a server.
 */

import type { FamilySchema, Params } from "./schema.js";

export type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

/** Network unreachable (as opposed to a structured HTTP error). */
export class ConnectionError extends Error {}

/** 422 with the offending field, straight from the service body. */
export class FieldError extends Error {
  constructor(
    public field: string,
    public reason: string,
  ) {
    super(`${field}: ${reason}`);
  }
}

export class HttpError extends Error {
  constructor(
    public status: number,
    message: string,
  ) {
    super(message);
  }
}

export interface PreviewResult {
  blob: Blob;
  hash: string;
}

export interface ImageItem {
  image_id: string;
  attributes: Record<string, string>;
  thumbnail: string;
}

export interface PresetItem {
  name: string;
  family: string;
  note: string;
  params: Params;
}

async function guard<T>(run: () => Promise<T>): Promise<T> {
  try {
    return await run();
  } catch (err) {
    if (err instanceof FieldError || err instanceof HttpError) throw err;
    throw new ConnectionError(String(err));
  }
}

async function raiseForStatus(resp: Response): Promise<void> {
  if (resp.ok) return;
  let detail: unknown = null;
  try {
    detail = (await resp.json()).detail;
  } catch {
    /* non-JSON body */
  }
  if (
    resp.status === 422 &&
    detail !== null &&
    typeof detail === "object" &&
    "field" in (detail as Record<string, unknown>)
  ) {
    const d = detail as { field: string; reason: string };
    throw new FieldError(d.field, d.reason);
  }
  throw new HttpError(resp.status, typeof detail === "string" ? detail : resp.statusText);
}

export class StudioApi {
  constructor(
    private fetchImpl: FetchLike,
    private base = "",
  ) {}

  async families(): Promise<FamilySchema[]> {
    return guard(async () => {
      const resp = await this.fetchImpl(`${this.base}/api/families`);
      await raiseForStatus(resp);
      return (await resp.json()) as FamilySchema[];
    });
  }

  async images(page = 1, size = 60): Promise<{ total: number; items: ImageItem[] }> {
    return guard(async () => {
      const resp = await this.fetchImpl(
        `${this.base}/api/images?page=${page}&size=${size}`,
      );
      await raiseForStatus(resp);
      return (await resp.json()) as { total: number; items: ImageItem[] };
    });
  }

  async preview(
    imageId: string,
    family: string,
    params: Params,
    seed: number,
    signal?: AbortSignal,
  ): Promise<PreviewResult> {
    return guard(async () => {
      const resp = await this.fetchImpl(`${this.base}/api/preview`, {
        method: "POST",
        headers: { "Content-Type": "application/json" },
        body: JSON.stringify({ image_id: imageId, family, params, seed }),
        signal,
      });
      await raiseForStatus(resp);
      return {
        blob: await resp.blob(),
        hash: resp.headers.get("X-Content-Hash") ?? "",
      };
    });
  }

  async sourceHash(imageId: string): Promise<string> {
    return guard(async () => {
      const resp = await this.fetchImpl(`${this.base}/api/images/${imageId}/source`);
      await raiseForStatus(resp);
      await resp.blob();
      return resp.headers.get("X-Content-Hash") ?? "";
    });
  }

  async presets(): Promise<PresetItem[]> {
    return guard(async () => {
      const resp = await this.fetchImpl(`${this.base}/api/presets`);
      await raiseForStatus(resp);
      return (await resp.json()) as PresetItem[];
    });
  }

  async savePreset(
    name: string,
    family: string,
    params: Params,
    note: string,
  ): Promise<void> {
    return guard(async () => {
      const resp = await this.fetchImpl(`${this.base}/api/presets`, {
        method: "POST",
        headers: { "Content-Type": "application/json" },
        body: JSON.stringify({ name, family, params, note }),
      });
      await raiseForStatus(resp);
    });
  }
}
