/**
 * Studio entry point: schema-driven parameter forms, debounced live
 * previews with a wipe divider, URL-fragment state, and preset saving.
 */

import { ConnectionError, FieldError, StudioApi } from "./api.js";
import { debounce } from "./debounce.js";
import { decodeFragment, encodeFragment, type ViewState } from "./fragment.js";
import { LatestWins } from "./inflight.js";
import {
  clampParams,
  clampValue,
  defaultParams,
  validateParams,
  type FamilySchema,
  type Params,
  type ParamValue,
} from "./schema.js";
import { overlayClip, positionFromPointer } from "./wipe.js";

const PREVIEW_DEBOUNCE_MS = 300;

const api = new StudioApi((input, init) => fetch(input, init));
const inflight = new LatestWins();

interface AppState {
  schemas: Map<string, FamilySchema>;
  view: ViewState;
  lastHash: string;
}

const state: AppState = {
  schemas: new Map(),
  view: { imageId: "", family: "overcast", params: {}, seed: 0 },
  lastHash: "",
};

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  attrs: Record<string, string> = {},
  text = "",
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  for (const [k, v] of Object.entries(attrs)) node.setAttribute(k, v);
  if (text) node.textContent = text;
  return node;
}

function byId<T extends HTMLElement>(id: string): T {
  return document.getElementById(id) as T;
}

function banner(message: string, retry?: () => void): void {
  const box = byId<HTMLDivElement>("banner");
  box.textContent = message;
  box.classList.toggle("hidden", message === "");
  box.onclick = null;
  if (retry) {
    const button = el("button", {}, "retry");
    button.onclick = retry;
    box.append(" ", button);
  }
}

function schema(): FamilySchema {
  const s = state.schemas.get(state.view.family);
  if (!s) throw new Error(`unknown family ${state.view.family}`);
  return s;
}

// ---------------------------------------------------------------------------
// Form generation (one control per schema field; ranges enforced by the
// input elements themselves, then re-clamped before any request)

function rgbToHex(rgb: number[]): string {
  return "#" + rgb.map((c) => c.toString(16).padStart(2, "0")).join("");
}

function hexToRgb(hex: string): [number, number, number] {
  const v = hex.replace("#", "");
  return [
    parseInt(v.slice(0, 2), 16),
    parseInt(v.slice(2, 4), 16),
    parseInt(v.slice(4, 6), 16),
  ];
}

function renderForm(): void {
  const form = byId<HTMLDivElement>("param-form");
  form.textContent = "";
  const s = schema();
  for (const field of s.fields) {
    const row = el("div", { class: "field", "data-field": field.name });
    row.append(el("label", {}, field.name));
    const value = state.view.params[field.name];
    if (field.kind === "float" || field.kind === "int") {
      const slider = el("input", {
        type: "range",
        min: String(field.min ?? 0),
        max: String(field.max ?? 1),
        step: String(field.step ?? (field.kind === "int" ? 1 : 0.01)),
        value: String(value),
      });
      const box = el("input", { type: "number", value: String(value) });
      const apply = (raw: string) => {
        const next = clampValue(Number(raw), field);
        slider.value = String(next);
        box.value = String(next);
        setParam(field.name, next);
      };
      slider.oninput = () => apply(slider.value);
      box.onchange = () => apply(box.value);
      row.append(slider, box);
    } else if (field.kind === "rgb") {
      const picker = el("input", {
        type: "color",
        value: rgbToHex(value as number[]),
      });
      picker.oninput = () => setParam(field.name, hexToRgb(picker.value));
      row.append(picker);
    } else {
      const pair = value as [number, number];
      const lo = el("input", { type: "number", value: String(pair[0]) });
      const hi = el("input", { type: "number", value: String(pair[1]) });
      const apply = () => {
        const next = clampValue([Number(lo.value), Number(hi.value)], field) as [
          number,
          number,
        ];
        [lo.value, hi.value] = [String(next[0]), String(next[1])];
        setParam(field.name, next);
      };
      lo.onchange = apply;
      hi.onchange = apply;
      row.append(lo, el("span", {}, ".."), hi);
    }
    row.append(el("span", { class: "field-error hidden" }));
    form.append(row);
  }
}

function showFieldError(field: string, reason: string): void {
  const row = document.querySelector(`[data-field="${field}"] .field-error`);
  if (row) {
    row.textContent = reason;
    row.classList.remove("hidden");
  } else {
    banner(`invalid ${field}: ${reason}`);
  }
}

function clearFieldErrors(): void {
  document
    .querySelectorAll(".field-error")
    .forEach((n) => n.classList.add("hidden"));
}

// ---------------------------------------------------------------------------
// Preview flow

const requestPreview = debounce(() => {
  void doPreview();
}, PREVIEW_DEBOUNCE_MS);

function setParam(name: string, value: ParamValue): void {
  state.view.params[name] = value;
  afterStateChange();
}

function afterStateChange(): void {
  clearFieldErrors();
  window.location.hash = encodeFragment(state.view);
  requestPreview();
}

async function doPreview(): Promise<void> {
  if (!state.view.imageId) return;
  const s = schema();
  const params = clampParams(state.view.params, s);
  const violations = validateParams(params, s);
  if (violations.length > 0) {
    const first = violations[0]!;
    showFieldError(first.field, first.reason);
    return; // never send out-of-schema requests
  }
  try {
    const result = await inflight.run((signal) =>
      api.preview(state.view.imageId, state.view.family, params, state.view.seed, signal),
    );
    if (result === null) return; // superseded by a newer request
    banner("");
    const url = URL.createObjectURL(result.blob);
    const overlay = byId<HTMLImageElement>("preview-img");
    overlay.onload = () => URL.revokeObjectURL(url);
    overlay.src = url;
    state.lastHash = result.hash;
    byId<HTMLSpanElement>("hash").textContent = result.hash.slice(0, 16);
  } catch (err) {
    if (err instanceof FieldError) {
      showFieldError(err.field, err.reason);
    } else if (err instanceof ConnectionError) {
      banner("connection lost.", () => void doPreview());
    } else {
      banner(String(err));
    }
  }
}

// ---------------------------------------------------------------------------
// Presets

async function refreshPresets(): Promise<void> {
  const select = byId<HTMLSelectElement>("preset-select");
  const current = select.value;
  select.textContent = "";
  select.append(el("option", { value: "" }, "presets..."));
  try {
    for (const preset of await api.presets()) {
      select.append(
        el(
          "option",
          { value: `${preset.family}/${preset.name}` },
          `${preset.family}/${preset.name}`,
        ),
      );
    }
    select.value = current;
  } catch {
    /* presets are non-critical; the banner flow covers saving */
  }
}

async function savePresetFlow(): Promise<void> {
  const name = byId<HTMLInputElement>("preset-name").value.trim();
  const note = byId<HTMLInputElement>("preset-note").value;
  const message = byId<HTMLSpanElement>("preset-message");
  if (!name) {
    message.textContent = "name required";
    return;
  }
  const s = schema();
  const params = clampParams(state.view.params, s);
  try {
    await api.savePreset(name, state.view.family, params, note);
    message.textContent = `saved ${name}`;
    await refreshPresets();
  } catch (err) {
    if (err instanceof FieldError) {
      showFieldError(err.field, err.reason);
    } else if (err instanceof ConnectionError) {
      banner("connection lost; preset not saved.", () => void savePresetFlow());
    } else {
      // duplicate name: prompt a rename, keep the form state untouched
      message.textContent = `name taken, pick another: ${String(
        (err as Error).message,
      )}`;
    }
  }
}

function applyPresetSelection(ref: string, presets: Map<string, Params>): void {
  const params = presets.get(ref);
  if (!params) return;
  const family = ref.split("/")[0]!;
  state.view.family = family;
  state.view.params = clampParams(params, schema());
  renderForm();
  afterStateChange();
}

// ---------------------------------------------------------------------------
// Wiring

function bindWipe(): void {
  const stage = byId<HTMLDivElement>("stage");
  const overlay = byId<HTMLImageElement>("preview-img");
  const divider = byId<HTMLDivElement>("divider");
  let dragging = false;

  const move = (clientX: number) => {
    const rect = stage.getBoundingClientRect();
    const percent = positionFromPointer(clientX, rect.left, rect.width);
    overlay.style.clipPath = overlayClip(percent);
    divider.style.left = `${percent}%`;
  };
  stage.addEventListener("pointerdown", (ev) => {
    dragging = true;
    move(ev.clientX);
  });
  window.addEventListener("pointermove", (ev) => {
    if (dragging) move(ev.clientX);
  });
  window.addEventListener("pointerup", () => {
    dragging = false;
  });
  move(0);
}

function bindSeed(): void {
  const seed = byId<HTMLInputElement>("seed");
  seed.value = String(state.view.seed);
  seed.onchange = () => {
    const raw = seed.value.trim();
    if (!/^\d+$/.test(raw)) {
      showFieldError("seed", "must be a non-negative integer");
      return; // local validation: no request issued
    }
    state.view.seed = Number(raw);
    afterStateChange();
  };
}

async function boot(): Promise<void> {
  try {
    const families = await api.families();
    for (const f of families) state.schemas.set(f.family, f);

    const tabs = byId<HTMLDivElement>("family-tabs");
    for (const f of families) {
      const tab = el("button", { class: "tab" }, f.family);
      tab.onclick = () => {
        state.view.family = f.family;
        state.view.params = defaultParams(f);
        renderForm();
        afterStateChange();
      };
      tabs.append(tab);
    }

    const fromUrl = decodeFragment(window.location.hash);
    const listing = await api.images();
    const sidebar = byId<HTMLDivElement>("images");
    for (const item of listing.items) {
      const thumb = el("img", { src: item.thumbnail, title: item.image_id });
      thumb.onclick = () => {
        state.view.imageId = item.image_id;
        byId<HTMLImageElement>("source-img").src = `/api/images/${item.image_id}/source`;
        afterStateChange();
      };
      sidebar.append(thumb);
    }

    if (fromUrl && state.schemas.has(fromUrl.family)) {
      state.view = {
        ...fromUrl,
        params: clampParams(fromUrl.params, state.schemas.get(fromUrl.family)!),
      };
    } else {
      const first = listing.items[0];
      state.view.imageId = first ? first.image_id : "";
      state.view.params = defaultParams(schema());
    }
    if (state.view.imageId) {
      byId<HTMLImageElement>("source-img").src =
        `/api/images/${state.view.imageId}/source`;
    }

    renderForm();
    bindSeed();
    bindWipe();
    byId<HTMLButtonElement>("preset-save").onclick = () => void savePresetFlow();
    const select = byId<HTMLSelectElement>("preset-select");
    select.onchange = async () => {
      const presets = new Map(
        (await api.presets()).map((p) => [`${p.family}/${p.name}`, p.params]),
      );
      applyPresetSelection(select.value, presets);
    };
    await refreshPresets();
    requestPreview();
  } catch (err) {
    if (err instanceof ConnectionError) {
      banner("service unreachable.", () => void boot());
    } else {
      banner(String(err));
    }
  }
}

if (typeof document !== "undefined" && document.getElementById("stage")) {
  void boot();
}
