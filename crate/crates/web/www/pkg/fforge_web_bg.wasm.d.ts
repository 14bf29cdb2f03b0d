/* tslint:disable */
/* eslint-disable */
export const memory: WebAssembly.Memory;
export const __wbg_geodesic_free: (a: number, b: number) => void;
export const __wbg_meanresult_free: (a: number, b: number) => void;
export const __wbg_principalgeodesic_free: (a: number, b: number) => void;
export const frechet_mean: (a: number, b: number, c: number, d: number, e: number, f: number, g: number) => [number, number, number];
export const geodesic: (a: number, b: number, c: number, d: number, e: number, f: number, g: number, h: number) => [number, number, number];
export const geodesic_iterations: (a: number) => number;
export const geodesic_length: (a: number) => number;
export const geodesic_points: (a: number) => [number, number];
export const meanresult_converged: (a: number) => number;
export const meanresult_curves: (a: number) => [number, number];
export const meanresult_grad_trace: (a: number) => [number, number];
export const meanresult_iterations: (a: number) => number;
export const meanresult_mean: (a: number) => [number, number];
export const meanresult_moi: (a: number) => number;
export const principal_geodesic: (a: number, b: number, c: number, d: number, e: number, f: number) => [number, number, number];
export const principalgeodesic_direction: (a: number) => [number, number];
export const principalgeodesic_eigenvalues: (a: number) => [number, number];
export const principalgeodesic_mean: (a: number) => [number, number];
export const principalgeodesic_path: (a: number) => [number, number];
export const __wbindgen_externrefs: WebAssembly.Table;
export const __wbindgen_malloc: (a: number, b: number) => number;
export const __wbindgen_realloc: (a: number, b: number, c: number, d: number) => number;
export const __externref_table_dealloc: (a: number) => void;
export const __wbindgen_free: (a: number, b: number, c: number) => void;
export const __wbindgen_start: () => void;
