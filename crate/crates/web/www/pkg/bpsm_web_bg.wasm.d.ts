/* tslint:disable */
/* eslint-disable */
export const memory: WebAssembly.Memory;
export const compare: (a: number, b: number, c: bigint, d: number, e: number) => [number, number];
export const match_frequency: (a: number, b: bigint, c: number, d: number) => [number, number];
export const ps_intervals: (a: number, b: bigint, c: number) => [number, number];
export const __wbindgen_externrefs: WebAssembly.Table;
export const __wbindgen_free: (a: number, b: number, c: number) => void;
export const __wbindgen_start: () => void;
