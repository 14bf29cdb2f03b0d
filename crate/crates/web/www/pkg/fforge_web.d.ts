/* tslint:disable */
/* eslint-disable */

export class Geodesic {
    private constructor();
    free(): void;
    [Symbol.dispose](): void;
    readonly iterations: number;
    readonly length: number;
    /**
     * Curve points, flattened.
     */
    readonly points: Float64Array;
}

export class MeanResult {
    private constructor();
    free(): void;
    [Symbol.dispose](): void;
    readonly converged: boolean;
    /**
     * All curves back to back, `T + 1` points each.
     */
    readonly curves: Float64Array;
    readonly grad_trace: Float64Array;
    readonly iterations: number;
    readonly mean: Float64Array;
    readonly moi: number;
}

export class PrincipalGeodesic {
    private constructor();
    free(): void;
    [Symbol.dispose](): void;
    /**
     * Unit chart direction of the first principal component.
     */
    readonly direction: Float64Array;
    readonly eigenvalues: Float64Array;
    readonly mean: Float64Array;
    /**
     * Geodesic through the mean along the direction, flattened.
     */
    readonly path: Float64Array;
}

/**
 * GEORCE-FM mean of the points. With wind, `backward` selects the mean as
 * the end point of the distances instead of the start point.
 */
export function frechet_mean(manifold: string, coords: Float64Array, wind_scale: number, backward: boolean, steps: number): MeanResult;

/**
 * GEORCE geodesic from `from` to `to`. A non-zero `wind_scale` turns the
 * manifold into a Randers field with the generic wind.
 */
export function geodesic(manifold: string, from: Float64Array, to: Float64Array, wind_scale: number, steps: number): Geodesic;

/**
 * Riemannian mean, tangent PCA of the approximate logs, and the geodesic
 * through the mean along the first direction, spanning `±spread·√λ₁`.
 */
export function principal_geodesic(manifold: string, coords: Float64Array, spread: number, steps: number): PrincipalGeodesic;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly __wbg_geodesic_free: (a: number, b: number) => void;
    readonly __wbg_meanresult_free: (a: number, b: number) => void;
    readonly __wbg_principalgeodesic_free: (a: number, b: number) => void;
    readonly frechet_mean: (a: number, b: number, c: number, d: number, e: number, f: number, g: number) => [number, number, number];
    readonly geodesic: (a: number, b: number, c: number, d: number, e: number, f: number, g: number, h: number) => [number, number, number];
    readonly geodesic_iterations: (a: number) => number;
    readonly geodesic_length: (a: number) => number;
    readonly geodesic_points: (a: number) => [number, number];
    readonly meanresult_converged: (a: number) => number;
    readonly meanresult_curves: (a: number) => [number, number];
    readonly meanresult_grad_trace: (a: number) => [number, number];
    readonly meanresult_iterations: (a: number) => number;
    readonly meanresult_mean: (a: number) => [number, number];
    readonly meanresult_moi: (a: number) => number;
    readonly principal_geodesic: (a: number, b: number, c: number, d: number, e: number, f: number) => [number, number, number];
    readonly principalgeodesic_direction: (a: number) => [number, number];
    readonly principalgeodesic_eigenvalues: (a: number) => [number, number];
    readonly principalgeodesic_mean: (a: number) => [number, number];
    readonly principalgeodesic_path: (a: number) => [number, number];
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
