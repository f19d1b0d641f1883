"""Vectorized numpy implementations of the per-pixel kernels.

These define the reference semantics. The compiled backend in _core.pyx must
produce bit-identical results, so every operation here is written with an
explicit order (float32 state, sequential sums over the component axis,
insertion-style re-sort expressed as a counted permutation) instead of the
shortest numpy spelling.
"""

from __future__ import annotations

import numpy as np


def mog2_update(
    means: np.ndarray,
    variances: np.ndarray,
    weights: np.ndarray,
    inv_sigma: np.ndarray,
    counts: np.ndarray,
    pixels: np.ndarray,
    learning_rate: float,
    match_threshold_sq: float,
    var_init: float,
    var_floor: float,
) -> None:
    """Advance every pixel's Gaussian mixture by one frame, in place.

    State arrays are (H, W, K) float32, ordered by weight/sigma descending
    within each pixel; counts is (H, W) int32 active-component counts;
    pixels is the (H, W) uint8 frame.
    """
    k = means.shape[-1]
    m = means.reshape(-1, k)
    v = variances.reshape(-1, k)
    w = weights.reshape(-1, k)
    g = inv_sigma.reshape(-1, k)
    cnt = counts.reshape(-1)
    x = pixels.reshape(-1).astype(np.float32)

    alpha = np.float32(learning_rate)
    one_minus_alpha = np.float32(1.0) - alpha
    thresh_sq = np.float32(match_threshold_sq)
    v_init = np.float32(var_init)
    v_floor = np.float32(var_floor)
    g_init = np.float32(1.0) / np.sqrt(v_init)

    slots = np.arange(k, dtype=np.int64)[None, :]
    active = slots < cnt[:, None]

    # Match scan: squared distance against per-component variance, winner is
    # the heaviest matching component (ties to the lowest slot).
    delta = x[:, None] - m
    matched = (delta * delta < thresh_sq * v) & active
    best = np.where(matched, w, np.float32(-1.0)).argmax(axis=1)
    any_match = np.take_along_axis(matched, best[:, None], axis=1)[:, 0]

    # Uniform weight decay over active components.
    w[:] = np.where(active, one_minus_alpha * w, w)

    # Unmatched pixels spawn into the first free slot, or evict the first
    # lowest-weight component once the mixture is full.
    evict = np.where(active, w, np.float32(np.inf)).argmin(axis=1)
    spawn_at = np.where(cnt < k, cnt.astype(np.int64), evict)
    changed = np.where(any_match, best, spawn_at)[:, None]

    w_ch = np.take_along_axis(w, changed, axis=1)[:, 0]
    m_ch = np.take_along_axis(m, changed, axis=1)[:, 0]
    v_ch = np.take_along_axis(v, changed, axis=1)[:, 0]

    # Matched path: bump weight, then blend mean/variance at rho = alpha/w.
    d = x - m_ch
    w_bumped = w_ch + alpha
    rho = alpha / w_bumped
    m_blend = m_ch + rho * d
    v_blend = np.maximum(v_ch + rho * (d * d - v_ch), v_floor)
    g_blend = np.float32(1.0) / np.sqrt(v_blend)

    np.put_along_axis(w, changed, np.where(any_match, w_bumped, alpha)[:, None], axis=1)
    np.put_along_axis(m, changed, np.where(any_match, m_blend, x)[:, None], axis=1)
    np.put_along_axis(v, changed, np.where(any_match, v_blend, v_init)[:, None], axis=1)
    np.put_along_axis(g, changed, np.where(any_match, g_blend, g_init)[:, None], axis=1)

    cnt[:] = np.where(any_match, cnt, np.minimum(cnt + 1, k)).astype(np.int32)
    active = slots < cnt[:, None]

    # Renormalize weights. The sum runs slot by slot so the compiled backend
    # (a plain sequential loop) rounds identically; inactive slots hold exact
    # zeros and do not perturb it.
    total = w[:, 0].copy()
    for j in range(1, k):
        total = total + w[:, j]
    w /= total[:, None]

    # Re-sort by weight * inv_sigma descending. Only `changed` moved, so the
    # permutation is a stable insertion: count how many other active slots
    # outrank it (strictly greater key, or equal key at a lower index).
    key = w * g
    key_ch = np.take_along_axis(key, changed, axis=1)
    others = active & (slots != changed)
    outranked = (others & (key > key_ch)).sum(axis=1)
    outranked += (others & (key == key_ch) & (slots < changed)).sum(axis=1)
    target = outranked[:, None]

    # Position q takes: the q-th remaining slot before the insertion point,
    # the changed slot at it, and the (q-1)-th remaining slot after. Beyond
    # the active range this reduces to the identity.
    before = slots + (slots >= changed)
    after = (slots - 1) + ((slots - 1) >= changed)
    perm = np.where(slots < target, before, np.where(slots == target, changed, after))
    for arr in (m, v, w, g):
        arr[:] = np.take_along_axis(arr, perm, axis=1)


def _window_sums(x: np.ndarray, window: int) -> np.ndarray:
    padded = np.zeros((x.shape[0] + 1, x.shape[1] + 1), dtype=np.int64)
    np.cumsum(np.cumsum(x, axis=0, dtype=np.int64), axis=1, out=padded[1:, 1:])
    return (
        padded[window:, window:]
        - padded[:-window, window:]
        - padded[window:, :-window]
        + padded[:-window, :-window]
    )


def ssim_mean(a: np.ndarray, b: np.ndarray, window: int, c1: float, c2: float) -> float:
    """Mean structural similarity over all stride-1 uniform windows.

    a and b are same-shape uint8 patches at least `window` on each side.
    Window moments come from exact integer sums, so the only rounding is in
    the final float64 arithmetic.
    """
    n = float(window * window)
    ai = a.astype(np.int64)
    bi = b.astype(np.int64)
    s1 = _window_sums(ai, window).astype(np.float64)
    s2 = _window_sums(bi, window).astype(np.float64)
    s11 = _window_sums(ai * ai, window).astype(np.float64)
    s22 = _window_sums(bi * bi, window).astype(np.float64)
    s12 = _window_sums(ai * bi, window).astype(np.float64)

    mu_a = s1 / n
    mu_b = s2 / n
    va = (s11 - s1 * s1 / n) / n
    vb = (s22 - s2 * s2 / n) / n
    vab = (s12 - s1 * s2 / n) / n

    lum_num = 2.0 * mu_a * mu_b + c1
    struct_num = 2.0 * vab + c2
    lum_den = mu_a * mu_a + mu_b * mu_b + c1
    struct_den = va + vb + c2
    smap = (lum_num * struct_num) / (lum_den * struct_den)
    return float(smap.mean())
