"""Solver for f*G - g*F = q over Z[x]/(x^n + 1).

Completes a short key pair (f, g) into a full trapdoor basis.  The recursion
projects the problem through the field norm down to integers, solves with an
extended gcd, lifts back up, and size-reduces the lifted solution against
(f, g) with Babai rounding in the Fourier domain.

Exact polynomial products use Kronecker substitution: coefficients are packed
into one big integer so CPython's native multiplication does the work.
"""

from __future__ import annotations

import math

import numpy as np

from dwpt_auth.errors import NotInvertible


def karamul(a: list[int], b: list[int]) -> list[int]:
    """Exact negacyclic product (mod x^n + 1) via Kronecker substitution."""
    n = len(a)
    max_a = max(1, max(abs(c) for c in a))
    max_b = max(1, max(abs(c) for c in b))
    # Any folded coefficient is bounded by 2n * max|a| * max|b|.
    width = max_a.bit_length() + max_b.bit_length() + n.bit_length() + 2
    pack_a = sum(c << (i * width) for i, c in enumerate(a))
    pack_b = sum(c << (i * width) for i, c in enumerate(b))
    product = pack_a * pack_b
    half = 1 << (width - 1)
    mask = (1 << width) - 1
    full = [0] * (2 * n)
    for k in range(2 * n - 1):
        digit = product & mask
        if digit >= half:
            digit -= 1 << width
        full[k] = digit
        product = (product - digit) >> width
    return [full[k] - full[k + n] for k in range(n)]


def galois_conjugate(a: list[int]) -> list[int]:
    """a(x) -> a(-x)."""
    return [c if i % 2 == 0 else -c for i, c in enumerate(a)]


def field_norm(a: list[int]) -> list[int]:
    """Project a from Z[x]/(x^n+1) to Z[y]/(y^(n/2)+1) via the field norm.

    With a = ae(x^2) + x*ao(x^2), the norm is ae^2 - y*ao^2.
    """
    half = len(a) // 2
    ae = a[0::2]
    ao = a[1::2]
    ae2 = karamul(ae, ae)
    ao2 = karamul(ao, ao)
    shifted = [-ao2[half - 1]] + ao2[: half - 1]
    return [ae2[i] - shifted[i] for i in range(half)]


def lift(a: list[int]) -> list[int]:
    """a(y) -> a(x^2) in the ring of twice the degree."""
    out = [0] * (2 * len(a))
    out[0::2] = a
    return out


def _bitsize(a: int) -> int:
    """Bit length rounded up to a byte boundary (window bookkeeping)."""
    val = abs(a)
    res = 0
    while val:
        res += 8
        val >>= 8
    return res


def _fft_neg(a: np.ndarray) -> np.ndarray:
    """Evaluate at the primitive 2n-th roots e^(i*pi*(2k+1)/n)."""
    n = len(a)
    twist = np.exp(1j * np.pi * np.arange(n) / n)
    return n * np.fft.ifft(a * twist)


def _ifft_neg(values: np.ndarray) -> np.ndarray:
    n = len(values)
    twist = np.exp(-1j * np.pi * np.arange(n) / n)
    return np.real(np.fft.fft(values) / n * twist)


def reduce_pair(f: list[int], g: list[int], F: list[int], G: list[int]) -> None:
    """Size-reduce (F, G) against (f, g) in place.

    Repeatedly subtracts k*(f, g) where k = round((F f* + G g*) / (f f* + g g*)),
    computed in the Fourier domain on 53-bit windows of the coefficients so
    arbitrarily large intermediate values stay within float precision.
    """
    size = max(
        53,
        _bitsize(min(f)),
        _bitsize(max(f)),
        _bitsize(min(g)),
        _bitsize(max(g)),
    )
    f_adj = np.array([c >> (size - 53) for c in f], dtype=np.float64)
    g_adj = np.array([c >> (size - 53) for c in g], dtype=np.float64)
    f_hat = _fft_neg(f_adj)
    g_hat = _fft_neg(g_adj)
    denom = f_hat * f_hat.conj() + g_hat * g_hat.conj()

    while True:
        big = max(
            53,
            _bitsize(min(F)),
            _bitsize(max(F)),
            _bitsize(min(G)),
            _bitsize(max(G)),
        )
        if big < size:
            break
        F_adj = np.array([c >> (big - 53) for c in F], dtype=np.float64)
        G_adj = np.array([c >> (big - 53) for c in G], dtype=np.float64)
        F_hat = _fft_neg(F_adj)
        G_hat = _fft_neg(G_adj)
        numer = F_hat * f_hat.conj() + G_hat * g_hat.conj()
        k = np.rint(_ifft_neg(numer / denom)).astype(np.int64)
        if not k.any():
            break
        k_list = [int(c) for c in k]
        fk = karamul(f, k_list)
        gk = karamul(g, k_list)
        shift = big - size
        for i in range(len(F)):
            F[i] -= fk[i] << shift
            G[i] -= gk[i] << shift


def _xgcd(a: int, b: int) -> tuple[int, int, int]:
    """(d, u, v) with u*a + v*b = d = gcd(a, b)."""
    old_r, r = a, b
    old_u, u = 1, 0
    old_v, v = 0, 1
    while r:
        quot = old_r // r
        old_r, r = r, old_r - quot * r
        old_u, u = u, old_u - quot * u
        old_v, v = v, old_v - quot * v
    if old_r < 0:
        old_r, old_u, old_v = -old_r, -old_u, -old_v
    return old_r, old_u, old_v


def ntru_solve(f: list[int], g: list[int], q: int) -> tuple[list[int], list[int]]:
    """Return (F, G) with f*G - g*F = q in Z[x]/(x^n + 1).

    Raises NotInvertible when the resultants of f and g share a factor that
    does not divide q; callers resample (f, g) on that outcome.
    """
    n = len(f)
    if n == 1:
        d, u, v = _xgcd(f[0], g[0])
        if d == 0 or q % d != 0:
            raise NotInvertible("constant-term gcd does not divide the modulus")
        scale = q // d
        return [-scale * v], [scale * u]
    fp = field_norm(f)
    gp = field_norm(g)
    Fp, Gp = ntru_solve(fp, gp, q)
    F = karamul(lift(Fp), galois_conjugate(g))
    G = karamul(lift(Gp), galois_conjugate(f))
    reduce_pair(f, g, F, G)
    return F, G
