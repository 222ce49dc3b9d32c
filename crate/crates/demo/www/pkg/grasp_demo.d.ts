/* tslint:disable */
/* eslint-disable */

/**
 * Moves a 224x224-frame label through a rotation about the frame centre and
 * then a centre-crop zoom, along both the corner path and the closed form.
 *
 * Returns `[x, y, theta_deg, w, h]` of each path followed by the corners of
 * the corner-path result (18 values), or an empty array if the centre leaves
 * the frame.
 */
export function augment_label(r: Float64Array, angle_deg: number, zoom: number): Float64Array;

/**
 * Scores a prediction against one truth with the default rectangle metric.
 *
 * Returns `[jaccard, angle_diff_deg, success, x0, y0, x1, y1, ...]` where the
 * trailing pairs are the vertices of the intersection polygon.
 */
export function compare(pred: Float64Array, truth: Float64Array): Float64Array;

/**
 * Four corners of a rectangle as `[x0, y0, ..., x3, y3]`.
 */
export function corners(r: Float64Array): Float64Array;

/**
 * Regression target of a label and its decoding.
 *
 * Returns the six normalized values `[x, y, sin, cos, w, h]` followed by the
 * decoded `[x, y, theta_deg, w, h]`. `noise` is added to every normalized
 * value before decoding, to show how the decoder treats imperfect outputs.
 */
export function round_trip(r: Float64Array, noise: number): Float64Array;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly augment_label: (a: number, b: number, c: number, d: number) => [number, number, number, number];
    readonly compare: (a: number, b: number, c: number, d: number) => [number, number, number, number];
    readonly corners: (a: number, b: number) => [number, number, number, number];
    readonly round_trip: (a: number, b: number, c: number) => [number, number, number, number];
    readonly __wbindgen_externrefs: WebAssembly.Table;
    readonly __wbindgen_malloc: (a: number, b: number) => number;
    readonly __externref_table_dealloc: (a: number) => void;
    readonly __wbindgen_free: (a: number, b: number, c: number) => void;
    readonly __wbindgen_start: () => void;
}

export type SyncInitInput = BufferSource | WebAssembly.Module;

/**
 * Instantiates the given `module`, which can either be bytes or
 * a precompiled `WebAssembly.Module`.
 *
 * @param {{ module: SyncInitInput }} module - Passing `SyncInitInput` directly is deprecated.
 *
 * @returns {InitOutput}
 */
export function initSync(module: { module: SyncInitInput } | SyncInitInput): InitOutput;

/**
 * If `module_or_path` is {RequestInfo} or {URL}, makes a request and
 * for everything else, calls `WebAssembly.instantiate` directly.
 *
 * @param {{ module_or_path: InitInput | Promise<InitInput> }} module_or_path - Passing `InitInput` directly is deprecated.
 *
 * @returns {Promise<InitOutput>}
 */
export default function __wbg_init (module_or_path?: { module_or_path: InitInput | Promise<InitInput> } | InitInput | Promise<InitInput>): Promise<InitOutput>;
