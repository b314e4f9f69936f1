/* tslint:disable */
/* eslint-disable */
export const memory: WebAssembly.Memory;
export const __wbg_simulation_free: (a: number, b: number) => void;
export const initialFractionCurve: (a: number, b: number, c: number) => [number, number];
export const linkCurve: (a: number, b: number, c: number, d: number) => [number, number, number, number];
export const simulation_advance: (a: number, b: number) => [number, number, number];
export const simulation_clock: (a: number) => number;
export const simulation_events: (a: number) => number;
export const simulation_isBalanced: (a: number) => number;
export const simulation_n: (a: number) => number;
export const simulation_new: (a: number, b: number, c: number, d: number, e: bigint) => [number, number, number];
export const simulation_unbalancedFraction: (a: number) => number;
export const simulation_weights: (a: number) => [number, number];
export const __wbindgen_externrefs: WebAssembly.Table;
export const __wbindgen_free: (a: number, b: number, c: number) => void;
export const __externref_table_dealloc: (a: number) => void;
export const __wbindgen_start: () => void;
