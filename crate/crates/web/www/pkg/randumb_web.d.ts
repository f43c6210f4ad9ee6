/* tslint:disable */
/* eslint-disable */

export class ToyRun {
    private constructor();
    free(): void;
    [Symbol.dispose](): void;
    readonly accuracy: number;
    readonly grid: Uint32Array;
    readonly labels: Uint32Array;
    /**
     * Training points as interleaved x, y.
     */
    readonly points: Float32Array;
}

export function classifyRings(variant: string, embed_dim: number, gamma: number, lambda: number, seed: number, resolution: number): ToyRun;

/**
 * Test accuracy of `variant` on the rings for each embedding size.
 */
export function dimensionCurve(variant: string, dims: Uint32Array, gamma: number, lambda: number, seed: number): Float64Array;

export function kernelProfile(num_bases: number, gamma: number, seed: number): Float64Array;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly __wbg_toyrun_free: (a: number, b: number) => void;
    readonly classifyRings: (a: number, b: number, c: number, d: number, e: number, f: number, g: number) => [number, number, number];
    readonly dimensionCurve: (a: number, b: number, c: number, d: number, e: number, f: number, g: number) => [number, number, number, number];
    readonly kernelProfile: (a: number, b: number, c: number) => [number, number, number, number];
    readonly toyrun_accuracy: (a: number) => number;
    readonly toyrun_grid: (a: number) => [number, number];
    readonly toyrun_labels: (a: number) => [number, number];
    readonly toyrun_points: (a: number) => [number, number];
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
