/* tslint:disable */
/* eslint-disable */

export function analyzeCounts(csv: string, mu: number, px: number, pulses: number): string;

export function bundledCsv(name: string): string | undefined;

export function bundledIndex(): string;

export function deviationCurve(frac: number, eps: number, k_min: number, k_max: number, points: number): Float64Array;

export function rateCurve(pulses: number, misalignment: number, l_max: number, step: number): Float64Array;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly analyzeCounts: (a: number, b: number, c: number, d: number, e: number) => [number, number, number, number];
    readonly bundledCsv: (a: number, b: number) => [number, number];
    readonly bundledIndex: () => [number, number];
    readonly deviationCurve: (a: number, b: number, c: number, d: number, e: number) => [number, number, number, number];
    readonly rateCurve: (a: number, b: number, c: number, d: number) => [number, number, number, number];
    readonly __wbindgen_externrefs: WebAssembly.Table;
    readonly __wbindgen_malloc: (a: number, b: number) => number;
    readonly __wbindgen_realloc: (a: number, b: number, c: number, d: number) => number;
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
