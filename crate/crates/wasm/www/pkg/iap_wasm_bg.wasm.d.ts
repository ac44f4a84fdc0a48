/* tslint:disable */
/* eslint-disable */
export const memory: WebAssembly.Memory;
export const __wbg_rgbaimage_free: (a: number, b: number) => void;
export const rgbaimage_height: (a: number) => number;
export const rgbaimage_pixels: (a: number) => [number, number];
export const rgbaimage_width: (a: number) => number;
export const ringKernel: (a: number, b: number, c: number, d: number) => [number, number, number];
export const rotationDeviation: (a: number, b: number) => [number, number, number, number];
export const superpixels: (a: number, b: number, c: number) => [number, number, number];
export const __wbindgen_externrefs: WebAssembly.Table;
export const __wbindgen_free: (a: number, b: number, c: number) => void;
export const __externref_table_dealloc: (a: number) => void;
export const __wbindgen_start: () => void;
