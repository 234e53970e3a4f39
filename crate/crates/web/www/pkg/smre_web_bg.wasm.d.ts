/* tslint:disable */
/* eslint-disable */
export const memory: WebAssembly.Memory;
export const __wbg_regression_free: (a: number, b: number) => void;
export const peak_example: (a: number, b: number, c: bigint) => [number, number, number, number];
export const quantile: (a: number, b: number, c: number) => [number, number, number];
export const quantile_samples: (a: number, b: number, c: number, d: number, e: bigint) => [number, number, number, number];
export const regress: (a: number, b: number, c: number, d: number, e: number, f: number, g: number, h: bigint) => [number, number, number];
export const regression_converged: (a: number) => number;
export const regression_estimate: (a: number) => [number, number];
export const regression_final_statistic: (a: number) => number;
export const regression_iterations: (a: number) => number;
export const regression_q: (a: number) => number;
export const regression_residuals: (a: number) => [number, number];
export const two_slab_path: (a: number, b: number, c: number, d: number, e: number, f: number, g: number, h: number, i: number) => [number, number, number, number];
export const __externref_table_alloc: () => number;
export const __wbindgen_externrefs: WebAssembly.Table;
export const __externref_table_dealloc: (a: number) => void;
export const __wbindgen_free: (a: number, b: number, c: number) => void;
export const __wbindgen_malloc: (a: number, b: number) => number;
export const __wbindgen_start: () => void;
