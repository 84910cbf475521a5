/* tslint:disable */
/* eslint-disable */
export const memory: WebAssembly.Memory;
export const __wbg_demo_free: (a: number, b: number) => void;
export const blob_profile: (a: number, b: number) => [number, number];
export const demo_angles: (a: number) => number;
export const demo_detectors: (a: number) => number;
export const demo_kept: (a: number, b: number) => number;
export const demo_new: (a: number, b: number, c: number) => [number, number, number];
export const demo_newPhantom: (a: number, b: number) => [number, number];
export const demo_phantom: (a: number) => [number, number];
export const demo_reconstruct: (a: number, b: number, c: number, d: number) => [number, number, number, number];
export const demo_relativeError: (a: number, b: number, c: number) => number;
export const demo_setNoise: (a: number, b: number, c: number) => [number, number];
export const demo_side: (a: number) => number;
export const demo_singularValues: (a: number) => [number, number];
export const demo_sinogram: (a: number) => [number, number];
export const filter_curve: (a: number, b: number, c: number, d: number) => [number, number, number, number];
export const __wbindgen_externrefs: WebAssembly.Table;
export const __wbindgen_free: (a: number, b: number, c: number) => void;
export const __externref_table_dealloc: (a: number) => void;
export const __wbindgen_malloc: (a: number, b: number) => number;
export const __wbindgen_realloc: (a: number, b: number, c: number, d: number) => number;
export const __wbindgen_start: () => void;
