/* tslint:disable */
/* eslint-disable */
export const memory: WebAssembly.Memory;
export const __wbg_curve_free: (a: number, b: number) => void;
export const cornerBound: (a: number, b: number, c: number, d: number) => [number, number, number, number];
export const curve_flat_price: (a: number) => number;
export const curve_flat_value: (a: number) => number;
export const curve_multi_prices: (a: number) => [number, number];
export const curve_multi_value: (a: number) => number;
export const curve_prices: (a: number) => [number, number];
export const curve_revenue: (a: number) => [number, number];
export const curve_welfare: (a: number) => [number, number];
export const priceCurve: (a: number, b: number, c: number, d: number, e: number, f: number, g: number, h: number) => [number, number, number];
export const twoLengthRatio: (a: number, b: number, c: number, d: number) => [number, number, number, number];
export const __wbindgen_externrefs: WebAssembly.Table;
export const __wbindgen_malloc: (a: number, b: number) => number;
export const __externref_table_dealloc: (a: number) => void;
export const __wbindgen_free: (a: number, b: number, c: number) => void;
export const __wbindgen_start: () => void;
