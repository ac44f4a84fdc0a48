/* tslint:disable */
/* eslint-disable */

/**
 * Row-major RGBA pixels.
 */
export class RgbaImage {
    private constructor();
    free(): void;
    [Symbol.dispose](): void;
    readonly height: number;
    readonly pixels: Uint8Array;
    readonly width: number;
}

export function ringKernel(order: number, radius: number, width: number, scale: number): RgbaImage;

export function rotationDeviation(seed: number, degrees: number): Float64Array;

export function superpixels(seed: number, segments: number, compactness: number): RgbaImage;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly __wbg_rgbaimage_free: (a: number, b: number) => void;
    readonly rgbaimage_height: (a: number) => number;
    readonly rgbaimage_pixels: (a: number) => [number, number];
    readonly rgbaimage_width: (a: number) => number;
    readonly ringKernel: (a: number, b: number, c: number, d: number) => [number, number, number];
    readonly rotationDeviation: (a: number, b: number) => [number, number, number, number];
    readonly superpixels: (a: number, b: number, c: number) => [number, number, number];
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
