/* tslint:disable */
/* eslint-disable */

/**
 * Welfare and revenue over a grid of flat prices, with both optima.
 */
export class Curve {
    private constructor();
    free(): void;
    [Symbol.dispose](): void;
    /**
     * One price per job length.
     */
    multi_prices(): Float64Array;
    prices(): Float64Array;
    revenue(): Float64Array;
    welfare(): Float64Array;
    readonly flat_price: number;
    readonly flat_value: number;
    readonly multi_value: number;
}

export function cornerBound(lengths: Uint32Array, probs: Float64Array): Float64Array;

export function priceCurve(lengths: Uint32Array, probs: Float64Array, lo: number, hi: number, points: number, lambda: number): Curve;

export function twoLengthRatio(a: number, b: number, r1: number, r2: number): Float64Array;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly __wbg_curve_free: (a: number, b: number) => void;
    readonly cornerBound: (a: number, b: number, c: number, d: number) => [number, number, number, number];
    readonly curve_flat_price: (a: number) => number;
    readonly curve_flat_value: (a: number) => number;
    readonly curve_multi_prices: (a: number) => [number, number];
    readonly curve_multi_value: (a: number) => number;
    readonly curve_prices: (a: number) => [number, number];
    readonly curve_revenue: (a: number) => [number, number];
    readonly curve_welfare: (a: number) => [number, number];
    readonly priceCurve: (a: number, b: number, c: number, d: number, e: number, f: number, g: number, h: number) => [number, number, number];
    readonly twoLengthRatio: (a: number, b: number, c: number, d: number) => [number, number, number, number];
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
