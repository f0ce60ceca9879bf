/* tslint:disable */
/* eslint-disable */

/**
 * Incidence matrix, heavy-hitter and VC dimension of a small family.
 */
export function explore_family(kind: string, n: number, k: number, seed: number): string;

/**
 * Random insertions, then an ℓ0 estimate for `[a, b]` against the truth.
 */
export function l0_interval(n: number, length: number, eps: number, seed: number, a: number, b: number): string;

/**
 * Turnstile stream with a deleted prefix, then an additive ℓp estimate for `[a, b]`.
 */
export function lp_interval(n: number, p: number, eps: number, seed: number, a: number, b: number, delete_fraction: number): string;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly explore_family: (a: number, b: number, c: number, d: number, e: number) => [number, number];
    readonly l0_interval: (a: number, b: number, c: number, d: number, e: number, f: number) => [number, number];
    readonly lp_interval: (a: number, b: number, c: number, d: number, e: number, f: number, g: number) => [number, number];
    readonly __wbindgen_externrefs: WebAssembly.Table;
    readonly __wbindgen_malloc: (a: number, b: number) => number;
    readonly __wbindgen_realloc: (a: number, b: number, c: number, d: number) => number;
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
