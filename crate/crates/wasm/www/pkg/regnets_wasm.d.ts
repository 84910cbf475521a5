/* tslint:disable */
/* eslint-disable */

/**
 * A small sparse-angle problem with one phantom and one noisy sinogram.
 */
export class Demo {
    free(): void;
    [Symbol.dispose](): void;
    angles(): number;
    detectors(): number;
    kept(alpha: number): number;
    newPhantom(seed: number): void;
    constructor(side: number, angles: number, seed: number);
    phantom(): Float64Array;
    reconstruct(kind: string, alpha: number): Float64Array;
    /**
     * `||x - phantom|| / ||phantom||`.
     */
    relativeError(x: Float64Array): number;
    setNoise(delta: number, seed: number): void;
    side(): number;
    singularValues(): Float64Array;
    /**
     * Noisy sinogram, angle-major.
     */
    sinogram(): Float64Array;
}

/**
 * Radial profile of a unit-support blob followed by its line integrals,
 * both sampled at `points` offsets in `[0, 1]`.
 */
export function blob_profile(shape: number, points: number): Float64Array;

export function filter_curve(kind: string, alpha: number, points: number): Float64Array;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly __wbg_demo_free: (a: number, b: number) => void;
    readonly blob_profile: (a: number, b: number) => [number, number];
    readonly demo_angles: (a: number) => number;
    readonly demo_detectors: (a: number) => number;
    readonly demo_kept: (a: number, b: number) => number;
    readonly demo_new: (a: number, b: number, c: number) => [number, number, number];
    readonly demo_newPhantom: (a: number, b: number) => [number, number];
    readonly demo_phantom: (a: number) => [number, number];
    readonly demo_reconstruct: (a: number, b: number, c: number, d: number) => [number, number, number, number];
    readonly demo_relativeError: (a: number, b: number, c: number) => number;
    readonly demo_setNoise: (a: number, b: number, c: number) => [number, number];
    readonly demo_side: (a: number) => number;
    readonly demo_singularValues: (a: number) => [number, number];
    readonly demo_sinogram: (a: number) => [number, number];
    readonly filter_curve: (a: number, b: number, c: number, d: number) => [number, number, number, number];
    readonly __wbindgen_externrefs: WebAssembly.Table;
    readonly __wbindgen_free: (a: number, b: number, c: number) => void;
    readonly __externref_table_dealloc: (a: number) => void;
    readonly __wbindgen_malloc: (a: number, b: number) => number;
    readonly __wbindgen_realloc: (a: number, b: number, c: number, d: number) => number;
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
