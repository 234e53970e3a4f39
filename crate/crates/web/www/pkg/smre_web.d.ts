/* tslint:disable */
/* eslint-disable */

/**
 * Result of [`regress`].
 */
export class Regression {
    private constructor();
    free(): void;
    [Symbol.dispose](): void;
    readonly converged: boolean;
    readonly estimate: Float64Array;
    /**
     * `T(Y - u)` of the estimate.
     */
    readonly final_statistic: number;
    readonly iterations: number;
    readonly q: number;
    /**
     * Outer residuals `r_k`.
     */
    readonly residuals: Float64Array;
}

/**
 * Peak test signal and a noisy copy (see [`peak_example_impl`]).
 */
export function peak_example(m: number, sigma: number, seed: bigint): Float64Array;

/**
 * Empirical `alpha`-quantile of `samples`.
 */
export function quantile(samples: Float64Array, alpha: number): number;

/**
 * Noise statistic samples (see [`quantile_samples_impl`]).
 */
export function quantile_samples(m: number, s_max: number, sigma: number, n_trials: number, seed: bigint): Float64Array;

/**
 * SMRE regression of `y` (see [`regress_impl`]).
 */
export function regress(y: Float64Array, s_max: number, sigma: number, alpha: number, lambda: number, n_trials: number, seed: bigint): Regression;

/**
 * Dykstra iterates for two slabs (see [`two_slab_path_impl`]).
 */
export function two_slab_path(hx: number, hy: number, ax: number, ay: number, qa: number, bx: number, by: number, qb: number, max_steps: number): Float64Array;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly __wbg_regression_free: (a: number, b: number) => void;
    readonly peak_example: (a: number, b: number, c: bigint) => [number, number, number, number];
    readonly quantile: (a: number, b: number, c: number) => [number, number, number];
    readonly quantile_samples: (a: number, b: number, c: number, d: number, e: bigint) => [number, number, number, number];
    readonly regress: (a: number, b: number, c: number, d: number, e: number, f: number, g: number, h: bigint) => [number, number, number];
    readonly regression_converged: (a: number) => number;
    readonly regression_estimate: (a: number) => [number, number];
    readonly regression_final_statistic: (a: number) => number;
    readonly regression_iterations: (a: number) => number;
    readonly regression_q: (a: number) => number;
    readonly regression_residuals: (a: number) => [number, number];
    readonly two_slab_path: (a: number, b: number, c: number, d: number, e: number, f: number, g: number, h: number, i: number) => [number, number, number, number];
    readonly __externref_table_alloc: () => number;
    readonly __wbindgen_externrefs: WebAssembly.Table;
    readonly __externref_table_dealloc: (a: number) => void;
    readonly __wbindgen_free: (a: number, b: number, c: number) => void;
    readonly __wbindgen_malloc: (a: number, b: number) => number;
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
