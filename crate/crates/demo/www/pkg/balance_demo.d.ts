/* tslint:disable */
/* eslint-disable */

/**
 * A single run that the page advances in batches of events.
 */
export class Simulation {
    free(): void;
    [Symbol.dispose](): void;
    advance(events: number): number;
    clock(): number;
    events(): number;
    isBalanced(): boolean;
    n(): number;
    constructor(n: number, mu: number, tau: number, without_replacement: boolean, seed: bigint);
    unbalancedFraction(): number;
    /**
     * Row-major `n x n` weights with a zero diagonal.
     */
    weights(): Float64Array;
}

export function initialFractionCurve(mu_min: number, mu_max: number, points: number): Float64Array;

export function linkCurve(x0: number, c: number, duration: number, points: number): Float64Array;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly __wbg_simulation_free: (a: number, b: number) => void;
    readonly initialFractionCurve: (a: number, b: number, c: number) => [number, number];
    readonly linkCurve: (a: number, b: number, c: number, d: number) => [number, number, number, number];
    readonly simulation_advance: (a: number, b: number) => [number, number, number];
    readonly simulation_clock: (a: number) => number;
    readonly simulation_events: (a: number) => number;
    readonly simulation_isBalanced: (a: number) => number;
    readonly simulation_n: (a: number) => number;
    readonly simulation_new: (a: number, b: number, c: number, d: number, e: bigint) => [number, number, number];
    readonly simulation_unbalancedFraction: (a: number) => number;
    readonly simulation_weights: (a: number) => [number, number];
    readonly __wbindgen_externrefs: WebAssembly.Table;
    readonly __wbindgen_free: (a: number, b: number, c: number) => void;
    readonly __externref_table_dealloc: (a: number) => void;
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
