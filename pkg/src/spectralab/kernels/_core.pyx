# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled kernel backend. Mirrors `_fallback.py` operation for operation."""

import numpy as np

cimport numpy as cnp
from libc.math cimport atan2, copysign, hypot, log, pi, remainder, sqrt

BACKEND_NAME = "compiled"

ctypedef double complex zdouble

cnp.import_array()


cdef inline double _cabs(zdouble z) nogil:
    return hypot(z.real, z.imag)


cdef inline double _wrap_phase(double phase) nogil:
    cdef double w = remainder(phase, 2.0 * pi)
    if w <= -pi:
        w += 2.0 * pi
    elif w > pi:
        w -= 2.0 * pi
    return w


def lu_factor(cnp.ndarray[zdouble, ndim=2] a):
    cdef Py_ssize_t n = a.shape[0]
    cdef cnp.ndarray[zdouble, ndim=2] lu = np.array(a, dtype=np.complex128, order="C", copy=True)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] piv = np.zeros(n, dtype=np.int64)
    cdef zdouble[:, ::1] m = lu
    cdef cnp.int64_t[::1] pv = piv
    cdef Py_ssize_t i, j, k, p
    cdef int sign = 1
    cdef double best, mag, min_pivot = np.inf
    cdef zdouble akk, mult, tmp
    for k in range(n):
        p = k
        best = _cabs(m[k, k])
        for i in range(k + 1, n):
            mag = _cabs(m[i, k])
            if mag > best:
                best = mag
                p = i
        pv[k] = p
        if p != k:
            for j in range(n):
                tmp = m[k, j]
                m[k, j] = m[p, j]
                m[p, j] = tmp
            sign = -sign
        akk = m[k, k]
        mag = _cabs(akk)
        if mag < min_pivot:
            min_pivot = mag
        if mag == 0.0:
            continue
        for i in range(k + 1, n):
            mult = m[i, k] / akk
            m[i, k] = mult
            if mult != 0.0:
                for j in range(k + 1, n):
                    m[i, j] = m[i, j] - mult * m[k, j]
    return lu, piv, sign, float(min_pivot)


def lu_solve(cnp.ndarray[zdouble, ndim=2] lu_arr,
             cnp.ndarray[cnp.int64_t, ndim=1] piv_arr,
             b):
    cdef Py_ssize_t n = lu_arr.shape[0]
    shape = b.shape
    cdef cnp.ndarray[zdouble, ndim=2] x = np.array(
        np.asarray(b, dtype=np.complex128).reshape(n, -1), order="C", copy=True)
    cdef zdouble[:, ::1] lu = lu_arr
    cdef zdouble[:, ::1] xv = x
    cdef cnp.int64_t[::1] piv = piv_arr
    cdef Py_ssize_t i, j, c, p, mcols = x.shape[1]
    cdef zdouble coef, tmp
    for i in range(n):
        p = piv[i]
        if p != i:
            for c in range(mcols):
                tmp = xv[i, c]
                xv[i, c] = xv[p, c]
                xv[p, c] = tmp
    for i in range(1, n):
        for j in range(i):
            coef = lu[i, j]
            if coef != 0.0:
                for c in range(mcols):
                    xv[i, c] = xv[i, c] - coef * xv[j, c]
    for i in range(n - 1, -1, -1):
        for j in range(i + 1, n):
            coef = lu[i, j]
            if coef != 0.0:
                for c in range(mcols):
                    xv[i, c] = xv[i, c] - coef * xv[j, c]
        coef = lu[i, i]
        for c in range(mcols):
            xv[i, c] = xv[i, c] / coef
    return x.reshape(shape)


def tridiagonalize(cnp.ndarray[zdouble, ndim=2] a):
    cdef Py_ssize_t n = a.shape[0]
    cdef cnp.ndarray[zdouble, ndim=2] work = np.array(a, dtype=np.complex128, order="C", copy=True)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] d = np.zeros(n, dtype=np.float64)
    cdef cnp.ndarray[zdouble, ndim=1] e = np.zeros(n, dtype=np.complex128)
    cdef cnp.ndarray[zdouble, ndim=2] vstore = np.zeros((max(n - 2, 0), n), dtype=np.complex128)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] betas = np.zeros(max(n - 2, 0), dtype=np.float64)
    cdef cnp.ndarray[zdouble, ndim=2] q = np.eye(n, dtype=np.complex128)
    cdef cnp.ndarray[zdouble, ndim=1] u = np.zeros(n, dtype=np.complex128)
    cdef zdouble[:, ::1] m = work
    cdef zdouble[:, ::1] vs = vstore
    cdef zdouble[:, ::1] qv = q
    cdef zdouble[::1] ev = e
    cdef zdouble[::1] uv = u
    cdef cnp.float64_t[::1] dv = d
    cdef cnp.float64_t[::1] bv = betas
    cdef Py_ssize_t i, j, k, nb, col
    cdef double nx2, nx, aa, beta, mag
    cdef zdouble alpha, s, acc, vu, half, vi, wi, ph_t
    for k in range(n - 2):
        nx2 = 0.0
        for i in range(k + 1, n):
            nx2 += m[i, k].real * m[i, k].real + m[i, k].imag * m[i, k].imag
        nx = sqrt(nx2)
        alpha = m[k + 1, k]
        if nx == 0.0:
            ev[k] = 0.0
            bv[k] = 0.0
            continue
        aa = _cabs(alpha)
        if aa > 0.0:
            s = alpha / aa
        else:
            s = 1.0
        nb = n - k - 1
        vs[k, 0] = alpha + s * nx
        nx2 = vs[k, 0].real * vs[k, 0].real + vs[k, 0].imag * vs[k, 0].imag
        for i in range(k + 2, n):
            vs[k, i - k - 1] = m[i, k]
            nx2 += m[i, k].real * m[i, k].real + m[i, k].imag * m[i, k].imag
        beta = 2.0 / nx2
        bv[k] = beta
        for i in range(nb):
            acc = 0.0
            for j in range(nb):
                acc = acc + m[k + 1 + i, k + 1 + j] * vs[k, j]
            uv[i] = beta * acc
        vu = 0.0
        for i in range(nb):
            vu = vu + vs[k, i].conjugate() * uv[i]
        half = 0.5 * beta * vu
        for i in range(nb):
            uv[i] = uv[i] - half * vs[k, i]
        for i in range(nb):
            vi = vs[k, i]
            wi = uv[i]
            for j in range(nb):
                m[k + 1 + i, k + 1 + j] = m[k + 1 + i, k + 1 + j] - vi * uv[j].conjugate() - wi * vs[k, j].conjugate()
        ev[k] = -s * nx
    if n >= 2:
        ev[n - 2] = m[n - 1, n - 2]
    for i in range(n):
        dv[i] = m[i, i].real
    for k in range(n - 3, -1, -1):
        beta = bv[k]
        if beta == 0.0:
            continue
        nb = n - k - 1
        for col in range(n):
            acc = 0.0
            for i in range(nb):
                acc = acc + vs[k, i].conjugate() * qv[k + 1 + i, col]
            acc = acc * beta
            if acc != 0.0:
                for i in range(nb):
                    qv[k + 1 + i, col] = qv[k + 1 + i, col] - vs[k, i] * acc
    cdef cnp.ndarray[cnp.float64_t, ndim=1] er = np.zeros(max(n - 1, 0), dtype=np.float64)
    cdef cnp.float64_t[::1] erv = er
    ph_t = 1.0
    cdef cnp.ndarray[zdouble, ndim=1] ph = np.ones(n, dtype=np.complex128)
    cdef zdouble[::1] phv = ph
    for k in range(n - 1):
        mag = _cabs(ev[k])
        erv[k] = mag
        if mag > 0.0:
            phv[k + 1] = phv[k] * (ev[k] / mag)
        else:
            phv[k + 1] = phv[k]
    for i in range(n):
        for j in range(n):
            qv[i, j] = qv[i, j] * phv[j]
    return d, er, q


def tql_implicit(cnp.ndarray[cnp.float64_t, ndim=1] d_arr,
                 cnp.ndarray[cnp.float64_t, ndim=1] e_arr,
                 cnp.ndarray[zdouble, ndim=2] q_arr,
                 int max_sweeps):
    cdef Py_ssize_t n = d_arr.shape[0]
    cdef cnp.ndarray[cnp.float64_t, ndim=1] d = d_arr.copy()
    cdef cnp.ndarray[cnp.float64_t, ndim=1] e = np.zeros(n, dtype=np.float64)
    cdef cnp.ndarray[zdouble, ndim=2] q = np.array(q_arr, dtype=np.complex128, order="C", copy=True)
    if n > 1:
        e[: n - 1] = e_arr[: n - 1]
    cdef cnp.float64_t[::1] dv = d
    cdef cnp.float64_t[::1] ev = e
    cdef zdouble[:, ::1] qv = q
    cdef double eps = 2.220446049250313e-16
    cdef Py_ssize_t l, m, i, row
    cdef int it
    cdef double dd, g, r, s, c, p, f, b
    cdef zdouble t
    cdef bint broke
    for l in range(n):
        it = 0
        while True:
            m = l
            while m < n - 1:
                dd = abs(dv[m]) + abs(dv[m + 1])
                if abs(ev[m]) <= eps * dd:
                    break
                m += 1
            if m == l:
                break
            it += 1
            if it > max_sweeps:
                return d, q, l, abs(ev[l])
            g = (dv[l + 1] - dv[l]) / (2.0 * ev[l])
            r = hypot(g, 1.0)
            g = dv[m] - dv[l] + ev[l] / (g + copysign(r, g))
            s = 1.0
            c = 1.0
            p = 0.0
            broke = False
            for i in range(m - 1, l - 1, -1):
                f = s * ev[i]
                b = c * ev[i]
                r = hypot(f, g)
                ev[i + 1] = r
                if r == 0.0:
                    dv[i + 1] -= p
                    ev[m] = 0.0
                    broke = True
                    break
                s = f / r
                c = g / r
                g = dv[i + 1] - p
                r = (dv[i] - g) * s + 2.0 * c * b
                p = s * r
                dv[i + 1] = g + p
                g = c * r - b
                for row in range(n):
                    t = qv[row, i + 1]
                    qv[row, i + 1] = s * qv[row, i] + c * t
                    qv[row, i] = c * qv[row, i] - s * t
            if broke:
                continue
            dv[l] -= p
            ev[l] = g
            ev[m] = 0.0
    return d, q, -1, 0.0


def hessenberg(cnp.ndarray[zdouble, ndim=2] a):
    cdef Py_ssize_t n = a.shape[0]
    cdef cnp.ndarray[zdouble, ndim=2] work = np.array(a, dtype=np.complex128, order="C", copy=True)
    cdef cnp.ndarray[zdouble, ndim=1] v = np.zeros(n, dtype=np.complex128)
    cdef zdouble[:, ::1] m = work
    cdef zdouble[::1] vv = v
    cdef Py_ssize_t i, j, k, nb
    cdef double nx2, nx, aa, beta
    cdef zdouble alpha, s, acc
    for k in range(n - 2):
        nx2 = 0.0
        for i in range(k + 1, n):
            nx2 += m[i, k].real * m[i, k].real + m[i, k].imag * m[i, k].imag
        nx = sqrt(nx2)
        if nx == 0.0:
            continue
        alpha = m[k + 1, k]
        aa = _cabs(alpha)
        if aa > 0.0:
            s = alpha / aa
        else:
            s = 1.0
        nb = n - k - 1
        vv[0] = alpha + s * nx
        nx2 = vv[0].real * vv[0].real + vv[0].imag * vv[0].imag
        for i in range(k + 2, n):
            vv[i - k - 1] = m[i, k]
            nx2 += m[i, k].real * m[i, k].real + m[i, k].imag * m[i, k].imag
        beta = 2.0 / nx2
        for j in range(k, n):
            acc = 0.0
            for i in range(nb):
                acc = acc + vv[i].conjugate() * m[k + 1 + i, j]
            acc = acc * beta
            if acc != 0.0:
                for i in range(nb):
                    m[k + 1 + i, j] = m[k + 1 + i, j] - vv[i] * acc
        for i in range(n):
            acc = 0.0
            for j in range(nb):
                acc = acc + m[i, k + 1 + j] * vv[j]
            acc = acc * beta
            if acc != 0.0:
                for j in range(nb):
                    m[i, k + 1 + j] = m[i, k + 1 + j] - acc * vv[j].conjugate()
        m[k + 1, k] = -s * nx
        for i in range(k + 2, n):
            m[i, k] = 0.0
    return work


def hess_logdet(cnp.ndarray[zdouble, ndim=2] h_arr, s_values):
    cdef Py_ssize_t n = h_arr.shape[0]
    cdef cnp.ndarray[zdouble, ndim=1] sv = np.ascontiguousarray(s_values, dtype=np.complex128)
    cdef Py_ssize_t ns = sv.shape[0]
    cdef cnp.ndarray[cnp.float64_t, ndim=1] out_mod = np.zeros(ns, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] out_ph = np.zeros(ns, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] out_piv = np.zeros(ns, dtype=np.float64)
    cdef cnp.ndarray[zdouble, ndim=2] work = np.zeros((n, n), dtype=np.complex128)
    cdef zdouble[:, ::1] h = np.ascontiguousarray(h_arr, dtype=np.complex128)
    cdef zdouble[:, ::1] w = work
    cdef zdouble[::1] ss = sv
    cdef cnp.float64_t[::1] om = out_mod
    cdef cnp.float64_t[::1] op = out_ph
    cdef cnp.float64_t[::1] ov = out_piv
    cdef Py_ssize_t idx, i, j, k, lo
    cdef zdouble s, akk, mult, tmp
    cdef double logmod, phase, mag, minpiv
    cdef int swaps
    cdef bint zero
    for idx in range(ns):
        s = ss[idx]
        for i in range(n):
            lo = i - 1 if i > 0 else 0
            for j in range(lo, n):
                if i == j:
                    w[i, j] = 1.0 + s * h[i, j]
                else:
                    w[i, j] = s * h[i, j]
        logmod = 0.0
        phase = 0.0
        swaps = 0
        minpiv = np.inf
        zero = False
        for k in range(n):
            akk = w[k, k]
            if k + 1 < n:
                if _cabs(w[k + 1, k]) > _cabs(akk):
                    for j in range(k, n):
                        tmp = w[k, j]
                        w[k, j] = w[k + 1, j]
                        w[k + 1, j] = tmp
                    swaps += 1
                    akk = w[k, k]
                mag = _cabs(akk)
                if mag < minpiv:
                    minpiv = mag
                if mag == 0.0:
                    zero = True
                    break
                mult = w[k + 1, k] / akk
                if mult != 0.0:
                    for j in range(k + 1, n):
                        w[k + 1, j] = w[k + 1, j] - mult * w[k, j]
            else:
                mag = _cabs(akk)
                if mag < minpiv:
                    minpiv = mag
                if mag == 0.0:
                    zero = True
                    break
            logmod += log(mag)
            phase += atan2(akk.imag, akk.real)
        if zero:
            om[idx] = -np.inf
            op[idx] = 0.0
            ov[idx] = 0.0
        else:
            if swaps & 1:
                phase += pi
            om[idx] = logmod
            op[idx] = _wrap_phase(phase)
            ov[idx] = minpiv
    return out_mod, out_ph, out_piv
