/* tslint:disable */
/* eslint-disable */

/**
 * PSM point estimate and BPSM posterior sample of the ATT on one dataset.
 * `caliper_sd <= 0` matches with replacement; otherwise without replacement
 * inside a caliper of that many standard deviations.
 */
export function compare(n: number, beta: number, seed: bigint, draws: number, caliper_sd: number): string;

/**
 * Share of BPSM matchings in which each unit is kept, against its
 * estimated score and whether standard PSM kept it.
 */
export function match_frequency(n: number, seed: bigint, draws: number, caliper_sd: number): string;

/**
 * Posterior mean and 95% interval of every unit's propensity score, next to
 * its maximum-likelihood score.
 */
export function ps_intervals(n: number, seed: bigint, draws: number): string;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly compare: (a: number, b: number, c: bigint, d: number, e: number) => [number, number];
    readonly match_frequency: (a: number, b: bigint, c: number, d: number) => [number, number];
    readonly ps_intervals: (a: number, b: bigint, c: number) => [number, number];
    readonly __wbindgen_externrefs: WebAssembly.Table;
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
