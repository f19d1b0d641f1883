"""Benchmark the compiled kernels against the pure-numpy fallback.

Runs the background-mixture update and the windowed-similarity kernel on
identical inputs through both backends, checks agreement, and reports
throughput. Usage:

    python benchmarks/bench_kernels.py --frames 50 --size 410x800
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from stall_sentinel._kernels import numpy_backend

try:
    from stall_sentinel._kernels import _core
except ImportError:
    _core = None


def fresh_state(h: int, w: int, k: int) -> dict[str, np.ndarray]:
    return {
        "means": np.zeros((h, w, k), dtype=np.float32),
        "variances": np.zeros((h, w, k), dtype=np.float32),
        "weights": np.zeros((h, w, k), dtype=np.float32),
        "inv_sigma": np.zeros((h, w, k), dtype=np.float32),
        "counts": np.zeros((h, w), dtype=np.int32),
    }


def bench_mog2(backend, frames: list[np.ndarray], k: int) -> tuple[dict, float]:
    h, w = frames[0].shape
    state = fresh_state(h, w, k)
    start = time.perf_counter()
    for frame in frames:
        backend.mog2_update(
            state["means"],
            state["variances"],
            state["weights"],
            state["inv_sigma"],
            state["counts"],
            frame,
            learning_rate=0.05,
            match_threshold_sq=9.0,
            var_init=225.0,
            var_floor=4.0,
        )
    elapsed = time.perf_counter() - start
    return state, elapsed


def bench_ssim(backend, pairs: list[tuple[np.ndarray, np.ndarray]]) -> tuple[list, float]:
    start = time.perf_counter()
    values = [backend.ssim_mean(a, b, 8, 6.5025, 58.5225) for a, b in pairs]
    elapsed = time.perf_counter() - start
    return values, elapsed


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--frames", type=int, default=50, help="frames for the mixture update")
    parser.add_argument("--size", default="410x800", help="frame size HxW")
    parser.add_argument("--components", type=int, default=3, help="mixture components")
    parser.add_argument("--pairs", type=int, default=200, help="patch pairs for similarity")
    parser.add_argument("--patch", default="64x96", help="patch size HxW")
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    h, w = (int(t) for t in args.size.split("x"))
    ph, pw = (int(t) for t in args.patch.split("x"))
    rng = np.random.default_rng(args.seed)
    frames = [
        rng.integers(0, 256, size=(h, w), dtype=np.uint8) for _ in range(args.frames)
    ]
    pairs = [
        (
            rng.integers(0, 256, size=(ph, pw), dtype=np.uint8),
            rng.integers(0, 256, size=(ph, pw), dtype=np.uint8),
        )
        for _ in range(args.pairs)
    ]

    px_per_update = h * w * args.frames
    np_state, np_time = bench_mog2(numpy_backend, frames, args.components)
    print(
        f"mog2 numpy   : {np_time:8.3f} s  "
        f"({px_per_update / np_time / 1e6:8.1f} Mpx/s)"
    )
    if _core is not None:
        c_state, c_time = bench_mog2(_core, frames, args.components)
        print(
            f"mog2 compiled: {c_time:8.3f} s  "
            f"({px_per_update / c_time / 1e6:8.1f} Mpx/s, "
            f"{np_time / c_time:5.1f}x)"
        )
        for key in np_state:
            if not np.array_equal(np_state[key], c_state[key]):
                raise SystemExit(f"backend mismatch in mixture state {key!r}")
        print("mog2 states bit-identical across backends")
    else:
        print("mog2 compiled: extension not built; skipped")

    n_windows = args.pairs * (ph - 7) * (pw - 7)
    np_vals, np_time = bench_ssim(numpy_backend, pairs)
    print(
        f"ssim numpy   : {np_time:8.3f} s  "
        f"({n_windows / np_time / 1e6:8.1f} Mwin/s)"
    )
    if _core is not None:
        c_vals, c_time = bench_ssim(_core, pairs)
        print(
            f"ssim compiled: {c_time:8.3f} s  "
            f"({n_windows / c_time / 1e6:8.1f} Mwin/s, "
            f"{np_time / c_time:5.1f}x)"
        )
        worst = max(abs(a - b) for a, b in zip(np_vals, c_vals))
        print(f"ssim max |numpy - compiled| = {worst:.3e}")
        if worst > 1e-9:
            raise SystemExit("ssim backends disagree beyond 1e-9")
    else:
        print("ssim compiled: extension not built; skipped")


if __name__ == "__main__":
    main()
