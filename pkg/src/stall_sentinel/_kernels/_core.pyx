# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled per-pixel kernels.

Bit-compatible with numpy_backend: float32 mixture state, identical
operation order, same stable insertion re-sort. numpy_backend holds the
reference semantics; keep the two in lockstep. The extension is built with
-ffp-contract=off so the compiler cannot fuse multiply-add chains that
numpy rounds in two steps.
"""

from libc.math cimport sqrtf


def mog2_update(float[:, :, ::1] means,
                float[:, :, ::1] variances,
                float[:, :, ::1] weights,
                float[:, :, ::1] inv_sigma,
                int[:, ::1] counts,
                const unsigned char[:, ::1] pixels,
                float learning_rate,
                float match_threshold_sq,
                float var_init,
                float var_floor):
    """Advance every pixel's Gaussian mixture by one frame, in place."""
    cdef Py_ssize_t height = pixels.shape[0]
    cdef Py_ssize_t width = pixels.shape[1]
    cdef Py_ssize_t kmax = means.shape[2]
    cdef float alpha = learning_rate
    cdef float one = <float>1.0
    cdef float one_minus_alpha = one - alpha
    cdef float thresh_sq = match_threshold_sq
    cdef float g_init = one / sqrtf(var_init)
    cdef Py_ssize_t y, x, i, j, cnt, best, changed, target
    cdef float xv, d, best_w, w_new, rho, v_new, total, key_c, key_i
    cdef float sm, sv, sw, sg

    with nogil:
        for y in range(height):
            for x in range(width):
                xv = <float>pixels[y, x]
                cnt = counts[y, x]

                # Match scan against pre-decay weights; ties keep the
                # lowest slot.
                best = -1
                best_w = <float>-1.0
                for i in range(cnt):
                    d = xv - means[y, x, i]
                    if d * d < thresh_sq * variances[y, x, i]:
                        if weights[y, x, i] > best_w:
                            best_w = weights[y, x, i]
                            best = i

                for i in range(cnt):
                    weights[y, x, i] = one_minus_alpha * weights[y, x, i]

                if best >= 0:
                    changed = best
                    w_new = weights[y, x, best] + alpha
                    weights[y, x, best] = w_new
                    rho = alpha / w_new
                    d = xv - means[y, x, best]
                    means[y, x, best] = means[y, x, best] + rho * d
                    v_new = variances[y, x, best] + rho * (d * d - variances[y, x, best])
                    if v_new < var_floor:
                        v_new = var_floor
                    variances[y, x, best] = v_new
                    inv_sigma[y, x, best] = one / sqrtf(v_new)
                else:
                    if cnt < kmax:
                        changed = cnt
                        cnt += 1
                        counts[y, x] = <int>cnt
                    else:
                        changed = 0
                        for i in range(1, cnt):
                            if weights[y, x, i] < weights[y, x, changed]:
                                changed = i
                    weights[y, x, changed] = alpha
                    means[y, x, changed] = xv
                    variances[y, x, changed] = var_init
                    inv_sigma[y, x, changed] = g_init

                total = <float>0.0
                for i in range(cnt):
                    total = total + weights[y, x, i]
                for i in range(cnt):
                    weights[y, x, i] = weights[y, x, i] / total

                # Stable insertion of the changed slot, key weight/sigma
                # descending: count the active slots that outrank it.
                key_c = weights[y, x, changed] * inv_sigma[y, x, changed]
                target = 0
                for i in range(cnt):
                    if i == changed:
                        continue
                    key_i = weights[y, x, i] * inv_sigma[y, x, i]
                    if key_i > key_c or (key_i == key_c and i < changed):
                        target += 1
                if target != changed:
                    sm = means[y, x, changed]
                    sv = variances[y, x, changed]
                    sw = weights[y, x, changed]
                    sg = inv_sigma[y, x, changed]
                    if target < changed:
                        for j in range(changed, target, -1):
                            means[y, x, j] = means[y, x, j - 1]
                            variances[y, x, j] = variances[y, x, j - 1]
                            weights[y, x, j] = weights[y, x, j - 1]
                            inv_sigma[y, x, j] = inv_sigma[y, x, j - 1]
                    else:
                        for j in range(changed, target):
                            means[y, x, j] = means[y, x, j + 1]
                            variances[y, x, j] = variances[y, x, j + 1]
                            weights[y, x, j] = weights[y, x, j + 1]
                            inv_sigma[y, x, j] = inv_sigma[y, x, j + 1]
                    means[y, x, target] = sm
                    variances[y, x, target] = sv
                    weights[y, x, target] = sw
                    inv_sigma[y, x, target] = sg


def ssim_mean(const unsigned char[:, ::1] a,
              const unsigned char[:, ::1] b,
              int window,
              double c1,
              double c2):
    """Mean structural similarity over all stride-1 uniform windows."""
    cdef Py_ssize_t height = a.shape[0]
    cdef Py_ssize_t width = a.shape[1]
    cdef Py_ssize_t ph = height - window + 1
    cdef Py_ssize_t pw = width - window + 1
    cdef double n = <double>(window * window)
    cdef double total = 0.0
    cdef Py_ssize_t i, j, y, x
    cdef long long s1, s2, s11, s22, s12, av, bv
    cdef double s1d, s2d, mu_a, mu_b, va, vb, vab
    cdef double lum_num, struct_num, lum_den, struct_den

    with nogil:
        for i in range(ph):
            for j in range(pw):
                s1 = 0
                s2 = 0
                s11 = 0
                s22 = 0
                s12 = 0
                for y in range(i, i + window):
                    for x in range(j, j + window):
                        av = <long long>a[y, x]
                        bv = <long long>b[y, x]
                        s1 += av
                        s2 += bv
                        s11 += av * av
                        s22 += bv * bv
                        s12 += av * bv
                s1d = <double>s1
                s2d = <double>s2
                mu_a = s1d / n
                mu_b = s2d / n
                va = (<double>s11 - s1d * s1d / n) / n
                vb = (<double>s22 - s2d * s2d / n) / n
                vab = (<double>s12 - s1d * s2d / n) / n
                lum_num = 2.0 * mu_a * mu_b + c1
                struct_num = 2.0 * vab + c2
                lum_den = mu_a * mu_a + mu_b * mu_b + c1
                struct_den = va + vb + c2
                total += (lum_num * struct_num) / (lum_den * struct_den)
    return total / <double>(ph * pw)
