"""Eigenvalues of small dense real matrices.

Householder reduction to upper Hessenberg form followed by the Francis
implicit double-shift QR iteration with deflation. 1x1 and 2x2 problems use
closed forms.
"""

from __future__ import annotations

import cmath
import math

import numpy as np

MAX_DIM = 64


class EigenConvergenceError(ArithmeticError):
    pass


def hessenberg(a) -> np.ndarray:
    """Orthogonally similar upper Hessenberg form of ``a`` (Householder reflections)."""
    h = np.array(a, dtype=np.float64)
    n = h.shape[0]
    for k in range(n - 2):
        x = h[k + 1:, k].copy()
        alpha = np.linalg.norm(x)
        if alpha == 0.0:
            continue
        if x[0] > 0:
            alpha = -alpha
        v = x
        v[0] -= alpha
        vnorm = np.linalg.norm(v)
        if vnorm == 0.0:
            continue
        v /= vnorm
        h[k + 1:, k:] -= 2.0 * np.outer(v, v @ h[k + 1:, k:])
        h[:, k + 1:] -= 2.0 * np.outer(h[:, k + 1:] @ v, v)
        h[k + 2:, k] = 0.0
    return h


def _eig2(a, b, c, d) -> tuple[complex, complex]:
    """Eigenvalues of [[a, b], [c, d]]."""
    tr = a + d
    half = 0.5 * (a - d)
    disc = half * half + b * c
    if disc >= 0.0:
        s = math.sqrt(disc)
        # avoid cancellation in the smaller root
        big = 0.5 * tr + math.copysign(s, tr) if tr != 0.0 else s
        det = a * d - b * c
        if big == 0.0:
            return complex(0.0), complex(0.0)
        if tr == 0.0:
            return complex(s), complex(-s)
        return complex(big), complex(det / big)
    s = math.sqrt(-disc)
    return complex(0.5 * tr, s), complex(0.5 * tr, -s)


def _hqr(h: np.ndarray, max_sweeps: int) -> list[complex]:
    """Francis double-shift QR on an upper Hessenberg matrix (destroys ``h``)."""
    n = h.shape[0]
    eigs: list[complex] = []
    anorm = np.abs(h).sum()
    if anorm == 0.0:
        return [complex(0.0)] * n
    nn = n - 1
    t = 0.0  # accumulated exceptional shift
    its = 0
    total_its = 0
    while nn >= 0:
        # find a small subdiagonal element
        l = nn
        while l >= 1:
            s = abs(h[l - 1, l - 1]) + abs(h[l, l])
            if s == 0.0:
                s = anorm
            if abs(h[l, l - 1]) <= np.finfo(float).eps * s:
                h[l, l - 1] = 0.0
                break
            l -= 1
        x = h[nn, nn]
        if l == nn:
            eigs.append(complex(x + t))
            nn -= 1
            its = 0
            continue
        y = h[nn - 1, nn - 1]
        w = h[nn, nn - 1] * h[nn - 1, nn]
        if l == nn - 1:
            e1, e2 = _eig2(h[nn - 1, nn - 1], h[nn - 1, nn], h[nn, nn - 1], h[nn, nn])
            eigs += [e1 + t, e2 + t]
            nn -= 2
            its = 0
            continue
        if total_its >= max_sweeps:
            raise EigenConvergenceError(f"QR iteration did not converge after {max_sweeps} sweeps")
        if its in (10, 20):
            # exceptional shift
            t += x
            for i in range(nn + 1):
                h[i, i] -= x
            s = abs(h[nn, nn - 1]) + abs(h[nn - 1, nn - 2])
            x = y = 0.75 * s
            w = -0.4375 * s * s
        its += 1
        total_its += 1
        # look for two consecutive small subdiagonal elements
        m = nn - 2
        while m >= l:
            z = h[m, m]
            r = x - z
            s = y - z
            p = (r * s - w) / h[m + 1, m] + h[m, m + 1]
            q = h[m + 1, m + 1] - z - r - s
            r = h[m + 2, m + 1]
            s = abs(p) + abs(q) + abs(r)
            p, q, r = p / s, q / s, r / s
            if m == l:
                break
            u = abs(h[m, m - 1]) * (abs(q) + abs(r))
            v = abs(p) * (abs(h[m - 1, m - 1]) + abs(z) + abs(h[m + 1, m + 1]))
            if u <= np.finfo(float).eps * v:
                break
            m -= 1
        for i in range(m + 2, nn + 1):
            h[i, i - 2] = 0.0
            if i != m + 2:
                h[i, i - 3] = 0.0
        # double-shift QR sweep on rows/cols l..nn
        k = m
        while k <= nn - 1:
            if k != m:
                p = h[k, k - 1]
                q = h[k + 1, k - 1]
                r = h[k + 2, k - 1] if k != nn - 1 else 0.0
                x = abs(p) + abs(q) + abs(r)
                if x != 0.0:
                    p, q, r = p / x, q / x, r / x
            s = math.copysign(math.sqrt(p * p + q * q + r * r), p)
            if s != 0.0:
                if k == m:
                    if l != m:
                        h[k, k - 1] = -h[k, k - 1]
                else:
                    h[k, k - 1] = -s * x
                p += s
                x = p / s
                y = q / s
                z = r / s
                q /= p
                r /= p
                for j in range(k, nn + 1):
                    p = h[k, j] + q * h[k + 1, j]
                    if k != nn - 1:
                        p += r * h[k + 2, j]
                        h[k + 2, j] -= p * z
                    h[k + 1, j] -= p * y
                    h[k, j] -= p * x
                mmin = nn if nn < k + 3 else k + 3
                for i in range(l, mmin + 1):
                    p = x * h[i, k] + y * h[i, k + 1]
                    if k != nn - 1:
                        p += z * h[i, k + 2]
                        h[i, k + 2] -= p * r
                    h[i, k + 1] -= p * q
                    h[i, k] -= p
            k += 1
    return eigs


def sort_by_modulus(values) -> list[complex]:
    """Descending modulus; ties broken by real then imaginary part (descending)."""
    return sorted((complex(v) for v in values), key=lambda v: (-abs(v), -v.real, -v.imag))


def eigenvalues(a, max_sweeps: int | None = None) -> list[complex]:
    """All eigenvalues of a real square matrix, with multiplicity, by descending modulus."""
    a = np.asarray(a, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {a.shape}")
    n = a.shape[0]
    if n > MAX_DIM:
        raise ValueError(f"matrix dimension {n} exceeds {MAX_DIM}")
    if not np.all(np.isfinite(a)):
        raise ValueError("matrix has non-finite entries")
    if n == 0:
        return []
    if n == 1:
        return [complex(a[0, 0])]
    if n == 2:
        return sort_by_modulus(_eig2(a[0, 0], a[0, 1], a[1, 0], a[1, 1]))
    # balance rows/columns by powers of two to reduce rounding on badly scaled input
    h = hessenberg(_balance(a))
    try:
        eigs = _hqr(h, max_sweeps if max_sweeps is not None else 30 * n)
    except EigenConvergenceError as exc:
        raise EigenConvergenceError(f"{exc}; matrix:\n{a!r}") from None
    return sort_by_modulus(eigs)


def _balance(a: np.ndarray) -> np.ndarray:
    a = a.copy()
    n = a.shape[0]
    radix = 2.0
    done = False
    while not done:
        done = True
        for i in range(n):
            c = np.abs(a[:, i]).sum() - abs(a[i, i])
            r = np.abs(a[i, :]).sum() - abs(a[i, i])
            if c == 0.0 or r == 0.0:
                continue
            g = r / radix
            f = 1.0
            s = c + r
            while c < g:
                f *= radix
                c *= radix * radix
            g = r * radix
            while c > g:
                f /= radix
                c /= radix * radix
            if (c + r) / f < 0.95 * s:
                done = False
                a[i, :] /= f
                a[:, i] *= f
    return a


def spectral_radius(a) -> float:
    return abs(eigenvalues(a)[0]) if np.asarray(a).size else 0.0


def principal_log(values) -> list[complex]:
    return [cmath.log(v) for v in values]
