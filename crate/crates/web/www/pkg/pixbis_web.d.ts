/* tslint:disable */
/* eslint-disable */

/**
 * Bonafide and attack scores with higher meaning more bonafide.
 */
export class RocExplorer {
    free(): void;
    [Symbol.dispose](): void;
    /**
     * `[far, frr, hter]` at `threshold`.
     */
    at(threshold: number): Float64Array;
    /**
     * `[threshold, eer]`.
     */
    eer(): Float64Array;
    constructor(bonafide: Float64Array, attack: Float64Array);
    /**
     * Flattened `(threshold, far, frr)` triples in threshold order.
     */
    roc(): Float64Array;
}

/**
 * A rendered face, optionally passed through one attack artifact.
 */
export class Sample {
    free(): void;
    [Symbol.dispose](): void;
    /**
     * Image-quality features, in the order of `iqm_names`.
     */
    iqm(): Float64Array;
    /**
     * Normalized uniform-LBP histogram; the last bin holds non-uniform codes.
     */
    lbp_histogram(): Float64Array;
    /**
     * LBP codes of the interior pixels drawn as gray levels, uniform
     * patterns spread over the range and the rest black.
     */
    lbp_rgba(): Uint8Array;
    constructor(pai: string, strength: number, subject: number, frame: number, seed: number, size: number);
    /**
     * Pixels as RGBA bytes for `ImageData`.
     */
    rgba(): Uint8Array;
    size(): number;
}

export function iqm_names(): string[];

export function pai_names(): string[];

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly __wbg_rocexplorer_free: (a: number, b: number) => void;
    readonly __wbg_sample_free: (a: number, b: number) => void;
    readonly iqm_names: () => [number, number];
    readonly pai_names: () => [number, number];
    readonly rocexplorer_at: (a: number, b: number) => [number, number, number, number];
    readonly rocexplorer_eer: (a: number) => [number, number, number, number];
    readonly rocexplorer_new: (a: number, b: number, c: number, d: number) => [number, number, number];
    readonly rocexplorer_roc: (a: number) => [number, number, number, number];
    readonly sample_iqm: (a: number) => [number, number];
    readonly sample_lbp_histogram: (a: number) => [number, number, number, number];
    readonly sample_lbp_rgba: (a: number) => [number, number, number, number];
    readonly sample_new: (a: number, b: number, c: number, d: number, e: number, f: number, g: number) => [number, number, number];
    readonly sample_rgba: (a: number) => [number, number];
    readonly sample_size: (a: number) => number;
    readonly __wbindgen_externrefs: WebAssembly.Table;
    readonly __externref_drop_slice: (a: number, b: number) => void;
    readonly __wbindgen_free: (a: number, b: number, c: number) => void;
    readonly __externref_table_dealloc: (a: number) => void;
    readonly __wbindgen_malloc: (a: number, b: number) => number;
    readonly __wbindgen_realloc: (a: number, b: number, c: number, d: number) => number;
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
