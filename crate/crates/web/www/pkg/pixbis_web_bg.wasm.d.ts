/* tslint:disable */
/* eslint-disable */
export const memory: WebAssembly.Memory;
export const __wbg_rocexplorer_free: (a: number, b: number) => void;
export const __wbg_sample_free: (a: number, b: number) => void;
export const iqm_names: () => [number, number];
export const pai_names: () => [number, number];
export const rocexplorer_at: (a: number, b: number) => [number, number, number, number];
export const rocexplorer_eer: (a: number) => [number, number, number, number];
export const rocexplorer_new: (a: number, b: number, c: number, d: number) => [number, number, number];
export const rocexplorer_roc: (a: number) => [number, number, number, number];
export const sample_iqm: (a: number) => [number, number];
export const sample_lbp_histogram: (a: number) => [number, number, number, number];
export const sample_lbp_rgba: (a: number) => [number, number, number, number];
export const sample_new: (a: number, b: number, c: number, d: number, e: number, f: number, g: number) => [number, number, number];
export const sample_rgba: (a: number) => [number, number];
export const sample_size: (a: number) => number;
export const __wbindgen_externrefs: WebAssembly.Table;
export const __externref_drop_slice: (a: number, b: number) => void;
export const __wbindgen_free: (a: number, b: number, c: number) => void;
export const __externref_table_dealloc: (a: number) => void;
export const __wbindgen_malloc: (a: number, b: number) => number;
export const __wbindgen_realloc: (a: number, b: number, c: number, d: number) => number;
export const __wbindgen_start: () => void;
