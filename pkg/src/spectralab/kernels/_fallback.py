"""Pure-Python kernel backend.

Same algorithms, same operation order as the compiled core in `_core.pyx`;
this module is the import-time fallback and the reference for the
backend-equivalence tests. Matrices cross the boundary as numpy arrays but
the inner loops run on plain lists of Python complex.
"""

from __future__ import annotations

import math

import numpy as np

BACKEND_NAME = "fallback"


def _tolist(a):
    return [list(row) for row in a.tolist()]


def _toarray(rows):
    return np.array(rows, dtype=np.complex128)


def lu_factor(a):
    """Partial-pivot Doolittle LU. Returns (lu, piv, sign, min_pivot)."""
    n = a.shape[0]
    lu = _tolist(a)
    piv = [0] * n
    sign = 1
    min_pivot = math.inf
    for k in range(n):
        p = k
        best = abs(lu[k][k])
        for i in range(k + 1, n):
            m = abs(lu[i][k])
            if m > best:
                best = m
                p = i
        piv[k] = p
        if p != k:
            lu[k], lu[p] = lu[p], lu[k]
            sign = -sign
        akk = lu[k][k]
        mag = abs(akk)
        if mag < min_pivot:
            min_pivot = mag
        if mag == 0.0:
            continue
        row_k = lu[k]
        for i in range(k + 1, n):
            row_i = lu[i]
            m = row_i[k] / akk
            row_i[k] = m
            if m != 0.0:
                for j in range(k + 1, n):
                    row_i[j] -= m * row_k[j]
    return _toarray(lu), np.array(piv, dtype=np.int64), sign, float(min_pivot)


def lu_solve(lu_arr, piv_arr, b):
    """Solve A X = B given the packed factorization of A."""
    n = lu_arr.shape[0]
    lu = _tolist(lu_arr)
    piv = piv_arr.tolist()
    x = _tolist(b.reshape(n, -1))
    m = len(x[0])
    for k in range(n):
        p = piv[k]
        if p != k:
            x[k], x[p] = x[p], x[k]
    for i in range(1, n):
        row = lu[i]
        xi = x[i]
        for j in range(i):
            lij = row[j]
            if lij != 0.0:
                xj = x[j]
                for c in range(m):
                    xi[c] -= lij * xj[c]
    for i in range(n - 1, -1, -1):
        row = lu[i]
        xi = x[i]
        for j in range(i + 1, n):
            uij = row[j]
            if uij != 0.0:
                xj = x[j]
                for c in range(m):
                    xi[c] -= uij * xj[c]
        uii = row[i]
        for c in range(m):
            xi[c] = xi[c] / uii
    out = _toarray(x)
    return out.reshape(b.shape)


def _wrap_phase(phase):
    w = math.remainder(phase, 2.0 * math.pi)
    if w <= -math.pi:
        w += 2.0 * math.pi
    elif w > math.pi:
        w -= 2.0 * math.pi
    return w


def tridiagonalize(a):
    """Householder reduction of a Hermitian matrix to real symmetric
    tridiagonal form. Returns (d, e, q) with A = Q T Q*, e[k] = T[k+1,k] >= 0.
    """
    n = a.shape[0]
    m = _tolist(a)
    d = [0.0] * n
    e = [0.0 + 0.0j] * n
    vs = []
    betas = []
    for k in range(n - 2):
        nx2 = 0.0
        for i in range(k + 1, n):
            t = m[i][k]
            nx2 += t.real * t.real + t.imag * t.imag
        nx = math.sqrt(nx2)
        alpha = m[k + 1][k]
        if nx == 0.0:
            e[k] = 0.0 + 0.0j
            vs.append(None)
            betas.append(0.0)
            continue
        aa = abs(alpha)
        s = alpha / aa if aa > 0.0 else 1.0 + 0.0j
        v = [0.0 + 0.0j] * (n - k - 1)
        v[0] = alpha + s * nx
        vnorm2 = v[0].real * v[0].real + v[0].imag * v[0].imag
        for i in range(k + 2, n):
            v[i - k - 1] = m[i][k]
            t = m[i][k]
            vnorm2 += t.real * t.real + t.imag * t.imag
        beta = 2.0 / vnorm2
        # u = beta * A2 v over the trailing block
        nb = n - k - 1
        u = [0.0 + 0.0j] * nb
        for i in range(nb):
            acc = 0.0 + 0.0j
            row = m[k + 1 + i]
            for j in range(nb):
                acc += row[k + 1 + j] * v[j]
            u[i] = beta * acc
        vu = 0.0 + 0.0j
        for i in range(nb):
            vu += v[i].conjugate() * u[i]
        half = 0.5 * beta * vu
        w = [u[i] - half * v[i] for i in range(nb)]
        for i in range(nb):
            row = m[k + 1 + i]
            vi = v[i]
            wi = w[i]
            for j in range(nb):
                row[k + 1 + j] -= vi * w[j].conjugate() + wi * v[j].conjugate()
        e[k] = -s * nx
        vs.append(v)
        betas.append(beta)
    if n >= 2:
        e[n - 2] = m[n - 1][n - 2]
    for i in range(n):
        d[i] = m[i][i].real
    # back-accumulate Q from the stored reflectors
    q = [[1.0 + 0.0j if i == j else 0.0 + 0.0j for j in range(n)] for i in range(n)]
    for k in range(n - 3, -1, -1):
        v = vs[k]
        if v is None:
            continue
        beta = betas[k]
        nb = n - k - 1
        for col in range(n):
            acc = 0.0 + 0.0j
            for i in range(nb):
                acc += v[i].conjugate() * q[k + 1 + i][col]
            acc *= beta
            if acc != 0.0:
                for i in range(nb):
                    q[k + 1 + i][col] -= v[i] * acc
    # unitary diagonal scaling making the subdiagonal real non-negative
    ph = [1.0 + 0.0j] * n
    er = [0.0] * n
    for k in range(n - 1):
        mag = abs(e[k])
        er[k] = mag
        ph[k + 1] = ph[k] * (e[k] / mag) if mag > 0.0 else ph[k]
    for i in range(n):
        row = q[i]
        for j in range(n):
            row[j] *= ph[j]
    return (
        np.array(d, dtype=np.float64),
        np.array(er[: max(n - 1, 0)], dtype=np.float64),
        _toarray(q),
    )


def tql_implicit(d_arr, e_arr, q_arr, max_sweeps):
    """Implicit-shift QL on a real symmetric tridiagonal, rotating the
    complex columns of q along. Returns (d, q, failed_index or -1, residual).
    """
    n = d_arr.shape[0]
    d = d_arr.tolist()
    e = e_arr.tolist() + [0.0]
    q = _tolist(q_arr)
    eps = 2.220446049250313e-16
    for l in range(n):
        it = 0
        while True:
            m = l
            while m < n - 1:
                dd = abs(d[m]) + abs(d[m + 1])
                if abs(e[m]) <= eps * dd:
                    break
                m += 1
            if m == l:
                break
            it += 1
            if it > max_sweeps:
                return np.array(d), _toarray(q), l, abs(e[l])
            g = (d[l + 1] - d[l]) / (2.0 * e[l])
            r = math.hypot(g, 1.0)
            g = d[m] - d[l] + e[l] / (g + math.copysign(r, g))
            s = 1.0
            c = 1.0
            p = 0.0
            broke = False
            for i in range(m - 1, l - 1, -1):
                f = s * e[i]
                b = c * e[i]
                r = math.hypot(f, g)
                e[i + 1] = r
                if r == 0.0:
                    d[i + 1] -= p
                    e[m] = 0.0
                    broke = True
                    break
                s = f / r
                c = g / r
                g = d[i + 1] - p
                r = (d[i] - g) * s + 2.0 * c * b
                p = s * r
                d[i + 1] = g + p
                g = c * r - b
                for row in q:
                    t = row[i + 1]
                    row[i + 1] = s * row[i] + c * t
                    row[i] = c * row[i] - s * t
            if broke:
                continue
            d[l] -= p
            e[l] = g
            e[m] = 0.0
    return np.array(d), _toarray(q), -1, 0.0


def hessenberg(a):
    """Householder similarity reduction to upper Hessenberg form."""
    n = a.shape[0]
    m = _tolist(a)
    for k in range(n - 2):
        nx2 = 0.0
        for i in range(k + 1, n):
            t = m[i][k]
            nx2 += t.real * t.real + t.imag * t.imag
        nx = math.sqrt(nx2)
        if nx == 0.0:
            continue
        alpha = m[k + 1][k]
        aa = abs(alpha)
        s = alpha / aa if aa > 0.0 else 1.0 + 0.0j
        nb = n - k - 1
        v = [0.0 + 0.0j] * nb
        v[0] = alpha + s * nx
        vnorm2 = v[0].real * v[0].real + v[0].imag * v[0].imag
        for i in range(k + 2, n):
            v[i - k - 1] = m[i][k]
            t = m[i][k]
            vnorm2 += t.real * t.real + t.imag * t.imag
        beta = 2.0 / vnorm2
        # left: rows k+1.. of columns k..n-1
        for j in range(k, n):
            acc = 0.0 + 0.0j
            for i in range(nb):
                acc += v[i].conjugate() * m[k + 1 + i][j]
            acc *= beta
            if acc != 0.0:
                for i in range(nb):
                    m[k + 1 + i][j] -= v[i] * acc
        # right: columns k+1.. of all rows
        for i in range(n):
            row = m[i]
            acc = 0.0 + 0.0j
            for j in range(nb):
                acc += row[k + 1 + j] * v[j]
            acc *= beta
            if acc != 0.0:
                for j in range(nb):
                    row[k + 1 + j] -= acc * v[j].conjugate()
        # the column is now s*(-nx) e1 up to roundoff; set exactly
        m[k + 1][k] = -s * nx
        for i in range(k + 2, n):
            m[i][k] = 0.0 + 0.0j
    return _toarray(m)


def hess_logdet(h_arr, s_values):
    """log|det|, arg det (in (-pi, pi]) and smallest pivot of I + s*H for
    each s, H upper Hessenberg. O(n^2) per sample.
    """
    n = h_arr.shape[0]
    h = _tolist(h_arr)
    out_mod = []
    out_ph = []
    out_piv = []
    for s in s_values:
        s = complex(s)
        w = [[(1.0 if i == j else 0.0) + s * h[i][j] for j in range(max(i - 1, 0), n)]
             for i in range(n)]
        # w[i] stores columns max(i-1,0)..n-1 of row i
        logmod = 0.0
        phase = 0.0
        swaps = 0
        minpiv = math.inf
        zero = False
        for k in range(n):
            off_k = max(k - 1, 0)
            row_k = w[k]
            akk = row_k[k - off_k]
            if k + 1 < n:
                row_s = w[k + 1]
                asub = row_s[0]  # column k of row k+1
                if abs(asub) > abs(akk):
                    # swap the overlapping segments (columns k..n-1)
                    base_k = k - off_k
                    for j in range(n - k):
                        row_k[base_k + j], row_s[j] = row_s[j], row_k[base_k + j]
                    swaps += 1
                    akk = row_k[k - off_k]
                mag = abs(akk)
                if mag < minpiv:
                    minpiv = mag
                if mag == 0.0:
                    zero = True
                    break
                mult = row_s[0] / akk
                if mult != 0.0:
                    base_k = k - off_k
                    for j in range(1, n - k):
                        row_s[j] -= mult * row_k[base_k + j]
            else:
                mag = abs(akk)
                if mag < minpiv:
                    minpiv = mag
                if mag == 0.0:
                    zero = True
                    break
            logmod += math.log(mag)
            phase += math.atan2(akk.imag, akk.real)
        if zero:
            out_mod.append(-math.inf)
            out_ph.append(0.0)
            out_piv.append(0.0)
        else:
            if swaps & 1:
                phase += math.pi
            out_mod.append(logmod)
            out_ph.append(_wrap_phase(phase))
            out_piv.append(minpiv)
    return (
        np.array(out_mod, dtype=np.float64),
        np.array(out_ph, dtype=np.float64),
        np.array(out_piv, dtype=np.float64),
    )
