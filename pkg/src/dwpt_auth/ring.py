"""Arithmetic in R_q = Z_q[x]/(x^N + 1).

Carrier types for every key, ciphertext, and hash-to-ring value in the
package, plus discrete Gaussian sampling and deterministic hashing of byte
strings into the ring.  Multiplication has two routes: a negacyclic
number-theoretic transform (requires q ≡ 1 mod 2N, always true for valid
parameters) and an arbitrary-precision schoolbook convolution kept as the
reference oracle; the test suite holds them bit-equal.
"""

from __future__ import annotations

import hashlib
import math
import struct
from dataclasses import dataclass

import numpy as np

from dwpt_auth.errors import NotInvertible, ParameterMismatch
from dwpt_auth.rng import RandomSource

# int64 NTT butterflies need q*q < 2**62; all parameter tiers are far below.
_NTT_Q_LIMIT = 1 << 31

_MR_BASES = (2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37)


def _is_prime(n: int) -> bool:
    """Deterministic Miller-Rabin, valid for all n < 3.3e24."""
    if n < 2:
        return False
    for p in _MR_BASES:
        if n % p == 0:
            return n == p
    d, s = n - 1, 0
    while d % 2 == 0:
        d //= 2
        s += 1
    for a in _MR_BASES:
        x = pow(a, d, n)
        if x in (1, n - 1):
            continue
        for _ in range(s - 1):
            x = x * x % n
            if x == n - 1:
                break
        else:
            return False
    return True


@dataclass(frozen=True)
class RingParams:
    """Ring dimension, modulus, and Gaussian widths for one parameter tier."""

    N: int
    q: int
    sigma_f: float
    sigma_extract: float

    def __post_init__(self):
        if self.N < 4 or self.N & (self.N - 1) != 0:
            raise ValueError(f"N must be a power of two >= 4, got {self.N}")
        if not _is_prime(self.q):
            raise ValueError(f"q must be prime, got {self.q}")
        if self.q % (2 * self.N) != 1:
            raise ValueError(f"q must satisfy q = 1 mod 2N, got q={self.q}, N={self.N}")
        if self.sigma_f <= 0 or self.sigma_extract <= 0:
            raise ValueError("Gaussian widths must be strictly positive")

    @property
    def coeff_width(self) -> int:
        """Bytes per serialized coefficient."""
        return (self.q.bit_length() + 7) // 8


def _tier(N: int, q: int) -> RingParams:
    # sigma_f targets key vectors of norm ~1.17*sqrt(q); sigma_extract covers
    # the Gram-Schmidt norm of accepted trapdoor bases with slack.
    return RingParams(
        N=N,
        q=q,
        sigma_f=1.17 * math.sqrt(q / (2 * N)),
        sigma_extract=1.5 * math.sqrt(q),
    )


#: Named parameter tiers.  "toy" is small enough for brute-force lattice
#: checks, "test" exercises realistic structure quickly, "default" is the
#: tier whose q passed the encrypt/decrypt round-trip calibration.
TIERS = {
    "toy": _tier(16, 97),
    "test": _tier(64, 12289),
    "default": _tier(512, 8380417),
}


# ---------------------------------------------------------------------------
# Negacyclic NTT machinery, cached per (N, q)

_NTT_CACHE: dict[tuple[int, int], tuple] = {}


def _bit_reverse(i: int, bits: int) -> int:
    out = 0
    for _ in range(bits):
        out = (out << 1) | (i & 1)
        i >>= 1
    return out


def _find_psi(N: int, q: int) -> int:
    """Primitive 2N-th root of unity mod q (exists since q = 1 mod 2N)."""
    exponent = (q - 1) // (2 * N)
    for candidate in range(2, q):
        psi = pow(candidate, exponent, q)
        if pow(psi, N, q) == q - 1:
            return psi
    raise ArithmeticError(f"no primitive 2N-th root of unity mod {q}")


def _ntt_context(N: int, q: int):
    key = (N, q)
    ctx = _NTT_CACHE.get(key)
    if ctx is None:
        psi = _find_psi(N, q)
        psi_inv = pow(psi, q - 2, q)
        bits = N.bit_length() - 1
        dtype = np.int64 if q < _NTT_Q_LIMIT else object
        fwd = np.array(
            [pow(psi, _bit_reverse(i, bits), q) for i in range(N)], dtype=dtype
        )
        inv = np.array(
            [pow(psi_inv, _bit_reverse(i, bits), q) for i in range(N)], dtype=dtype
        )
        n_inv = pow(N, q - 2, q)
        ctx = (fwd, inv, n_inv)
        _NTT_CACHE[key] = ctx
    return ctx


def _ntt_forward(values: np.ndarray, N: int, q: int) -> np.ndarray:
    """Cooley-Tukey NTT with the psi twist folded in; output bit-reversed."""
    fwd, _, _ = _ntt_context(N, q)
    v = values.copy()
    t, m = N, 1
    while m < N:
        t //= 2
        blocks = v.reshape(m, 2 * t)
        lo = blocks[:, :t]
        hi = blocks[:, t:]
        s = fwd[m : 2 * m, None]
        prod = hi * s % q
        v = np.concatenate(((lo + prod) % q, (lo - prod) % q), axis=1).reshape(-1)
        m *= 2
    return v


def _ntt_inverse(values: np.ndarray, N: int, q: int) -> np.ndarray:
    """Gentleman-Sande inverse of `_ntt_forward`."""
    _, inv, n_inv = _ntt_context(N, q)
    v = values.copy()
    t, m = 1, N
    while m > 1:
        h = m // 2
        blocks = v.reshape(h, 2 * t)
        lo = blocks[:, :t]
        hi = blocks[:, t:]
        s = inv[h : 2 * h, None]
        v = np.concatenate(
            (((lo + hi) % q), (lo - hi) * s % q), axis=1
        ).reshape(-1)
        t *= 2
        m = h
    return v * n_inv % q


# ---------------------------------------------------------------------------
# Ring elements

class RingElement:
    """Degree-N polynomial over Z_q, coefficients canonical in [0, q)."""

    __slots__ = ("params", "coeffs")

    def __init__(self, params: RingParams, coeffs):
        arr = np.asarray(coeffs, dtype=object) if params.q >= _NTT_Q_LIMIT else None
        if arr is None:
            arr = np.asarray(coeffs, dtype=np.int64)
        if arr.shape != (params.N,):
            raise ValueError(f"expected {params.N} coefficients, got {arr.shape}")
        arr = arr % params.q
        if params.q < _NTT_Q_LIMIT:
            arr = arr.astype(np.int64)
        arr.setflags(write=False)
        self.params = params
        self.coeffs = arr

    # -- constructors --------------------------------------------------

    @classmethod
    def zero(cls, params: RingParams) -> "RingElement":
        return cls(params, np.zeros(params.N, dtype=np.int64))

    @classmethod
    def one(cls, params: RingParams) -> "RingElement":
        return cls.constant(params, 1)

    @classmethod
    def constant(cls, params: RingParams, c: int) -> "RingElement":
        coeffs = np.zeros(params.N, dtype=np.int64)
        coeffs[0] = c % params.q
        return cls(params, coeffs)

    @classmethod
    def monomial(cls, params: RingParams, degree: int, c: int = 1) -> "RingElement":
        if not 0 <= degree < params.N:
            raise ValueError("monomial degree out of range")
        coeffs = np.zeros(params.N, dtype=np.int64)
        coeffs[degree] = c % params.q
        return cls(params, coeffs)

    # -- views -----------------------------------------------------------

    def centered(self) -> np.ndarray:
        """Representative in (-q/2, q/2], used for norms and decryption."""
        q = self.params.q
        c = self.coeffs.astype(object if q >= _NTT_Q_LIMIT else np.int64, copy=True)
        c[c > q // 2] -= q
        return c

    def norm_squared(self) -> int:
        c = self.centered()
        return int(np.sum(c.astype(object) ** 2))

    def is_zero(self) -> bool:
        return not self.coeffs.any()

    # -- arithmetic --------------------------------------------------------

    def _check(self, other: "RingElement"):
        if self.params != other.params:
            raise ParameterMismatch(
                f"ring parameter mismatch: {self.params} vs {other.params}"
            )

    def __add__(self, other: "RingElement") -> "RingElement":
        self._check(other)
        return RingElement(self.params, (self.coeffs + other.coeffs) % self.params.q)

    def __sub__(self, other: "RingElement") -> "RingElement":
        self._check(other)
        return RingElement(self.params, (self.coeffs - other.coeffs) % self.params.q)

    def __neg__(self) -> "RingElement":
        return RingElement(self.params, (-self.coeffs) % self.params.q)

    def scale(self, c: int) -> "RingElement":
        return RingElement(self.params, self.coeffs * (c % self.params.q) % self.params.q)

    def __mul__(self, other: "RingElement") -> "RingElement":
        self._check(other)
        N, q = self.params.N, self.params.q
        a = _ntt_forward(self.coeffs, N, q)
        b = _ntt_forward(other.coeffs, N, q)
        prod = _ntt_inverse(a * b % q, N, q)
        return RingElement(self.params, prod)

    def inverse(self) -> "RingElement":
        """Inverse in R_q via NTT point inversion; NotInvertible if any
        evaluation at a root of x^N+1 vanishes."""
        N, q = self.params.N, self.params.q
        points = _ntt_forward(self.coeffs, N, q)
        if np.any(points == 0):
            raise NotInvertible("element shares a factor with x^N+1 mod q")
        dtype = np.int64 if q < _NTT_Q_LIMIT else object
        inv_points = np.array([pow(int(x), q - 2, q) for x in points], dtype=dtype)
        return RingElement(self.params, _ntt_inverse(inv_points, N, q))

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, RingElement)
            and self.params == other.params
            and bool(np.array_equal(self.coeffs, other.coeffs))
        )

    def __hash__(self):
        return hash((self.params, self.coeffs.tobytes()))

    def __repr__(self):
        return f"RingElement(N={self.params.N}, q={self.params.q}, coeffs={list(self.coeffs[:4])}...)"

    # -- serialization -------------------------------------------------

    def to_bytes(self) -> bytes:
        """Header (N as u16 LE, q as u64 LE) then minimal-width LE coefficients."""
        width = self.params.coeff_width
        out = bytearray(struct.pack("<HQ", self.params.N, self.params.q))
        for c in self.coeffs:
            out += int(c).to_bytes(width, "little")
        return bytes(out)

    @classmethod
    def from_bytes(cls, data: bytes, params: RingParams | None = None) -> "RingElement":
        N, q = struct.unpack_from("<HQ", data, 0)
        if params is None:
            params = _tier(N, q)
        elif (params.N, params.q) != (N, q):
            raise ParameterMismatch(
                f"serialized header (N={N}, q={q}) does not match params"
            )
        width = params.coeff_width
        expected = 10 + N * width
        if len(data) != expected:
            raise ValueError(f"expected {expected} bytes, got {len(data)}")
        coeffs = [
            int.from_bytes(data[10 + i * width : 10 + (i + 1) * width], "little")
            for i in range(N)
        ]
        if any(c >= q for c in coeffs):
            raise ValueError("coefficient outside [0, q)")
        return cls(params, coeffs)


class IntegerPolynomial:
    """Degree-N polynomial over Z, no modular reduction (exact arithmetic)."""

    __slots__ = ("coeffs",)

    def __init__(self, coeffs):
        self.coeffs = [int(c) for c in coeffs]

    def __len__(self):
        return len(self.coeffs)

    def __eq__(self, other):
        return isinstance(other, IntegerPolynomial) and self.coeffs == other.coeffs

    def __add__(self, other):
        return IntegerPolynomial([a + b for a, b in zip(self.coeffs, other.coeffs)])

    def __sub__(self, other):
        return IntegerPolynomial([a - b for a, b in zip(self.coeffs, other.coeffs)])

    def __neg__(self):
        return IntegerPolynomial([-a for a in self.coeffs])

    def mul_mod_phi(self, other: "IntegerPolynomial") -> "IntegerPolynomial":
        """Exact schoolbook product reduced by x^N = -1."""
        n = len(self.coeffs)
        out = [0] * n
        for i, a in enumerate(self.coeffs):
            if a == 0:
                continue
            for j, b in enumerate(other.coeffs):
                k = i + j
                if k < n:
                    out[k] += a * b
                else:
                    out[k - n] -= a * b
        return IntegerPolynomial(out)

    def norm_squared(self) -> int:
        return sum(c * c for c in self.coeffs)

    def to_ring(self, params: RingParams) -> RingElement:
        if len(self.coeffs) != params.N:
            raise ParameterMismatch("degree does not match ring parameters")
        return RingElement(params, [c % params.q for c in self.coeffs])

    def __repr__(self):
        return f"IntegerPolynomial({self.coeffs[:4]}...)"


# ---------------------------------------------------------------------------
# Spec operations

def ring_add(a: RingElement, b: RingElement) -> RingElement:
    return a + b


def ring_mul(a: RingElement, b: RingElement) -> RingElement:
    return a * b


def ring_inverse(a: RingElement) -> RingElement:
    return a.inverse()


def schoolbook_mul(a: RingElement, b: RingElement) -> RingElement:
    """Reference negacyclic convolution with arbitrary-precision integers.

    This is the oracle route: O(N^2), no transform, exact by construction.
    """
    a._check(b)
    n, q = a.params.N, a.params.q
    big = np.convolve(a.coeffs.astype(object), b.coeffs.astype(object))
    folded = big[:n].copy()
    folded[: n - 1] -= big[n:]
    return RingElement(a.params, folded % q)


_GAUSS_TABLE_CACHE: dict[float, tuple[np.ndarray, np.ndarray]] = {}


def _gauss_table(sigma: float):
    table = _GAUSS_TABLE_CACHE.get(sigma)
    if table is None:
        tail = max(1, math.ceil(12.0 * sigma))
        support = np.arange(-tail, tail + 1, dtype=np.int64)
        weights = np.exp(-(support.astype(np.float64) ** 2) / (2.0 * sigma * sigma))
        cdf = np.cumsum(weights)
        cdf /= cdf[-1]
        table = (support, cdf)
        _GAUSS_TABLE_CACHE[sigma] = table
    return table


def sample_gaussian_poly(
    params: RingParams, sigma: float, rng: RandomSource
) -> IntegerPolynomial:
    """N iid samples from the centered discrete Gaussian of width sigma.

    Cumulative-table inversion with the tail cut at 12*sigma; deterministic
    for a fixed random source.
    """
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    support, cdf = _gauss_table(float(sigma))
    u = rng.uniforms(params.N)
    idx = np.searchsorted(cdf, u, side="right")
    return IntegerPolynomial(support[idx])


def sample_gaussian_int(center: float, sigma: float, rng: RandomSource) -> int:
    """One discrete Gaussian sample around an arbitrary real center.

    Support is the integer window center +/- 12*sigma (at least +/-2), with
    probabilities proportional to exp(-(z-center)^2 / 2 sigma^2); used by the
    randomized nearest-plane sampler.
    """
    halfwidth = max(2, math.ceil(12.0 * sigma))
    lo = math.ceil(center - halfwidth)
    support = np.arange(lo, math.floor(center + halfwidth) + 1, dtype=np.int64)
    weights = np.exp(-((support - center) ** 2) / (2.0 * sigma * sigma))
    total = weights.sum()
    if total <= 0.0 or not np.isfinite(total):
        return round(center)
    cdf = np.cumsum(weights)
    idx = int(np.searchsorted(cdf, rng.uniform() * total, side="right"))
    return int(support[min(idx, len(support) - 1)])


def hash_to_ring(data: bytes, params: RingParams) -> RingElement:
    """Deterministic map {0,1}* -> Z_q^N.

    Counter-mode expansion of SHA-256 (data || 32-bit LE counter); each
    32-bit LE word of the stream is rejection-sampled into [0, q).
    """
    q = params.q
    limit = ((1 << 32) // q) * q
    coeffs = []
    counter = 0
    while len(coeffs) < params.N:
        block = hashlib.sha256(data + counter.to_bytes(4, "little")).digest()
        counter += 1
        for off in range(0, 32, 4):
            word = int.from_bytes(block[off : off + 4], "little")
            if word < limit:
                coeffs.append(word % q)
                if len(coeffs) == params.N:
                    break
    return RingElement(params, coeffs)


def anticirculant_matrix(h: RingElement) -> np.ndarray:
    """N x N matrix whose row i is the coefficient vector of x^i * h in R.

    Intended for small-N lattice membership checks; entries in [0, q).
    """
    N, q = h.params.N, h.params.q
    rows = np.empty((N, N), dtype=np.int64)
    row = h.coeffs.astype(np.int64, copy=True)
    for i in range(N):
        rows[i] = row
        row = np.roll(row, 1)
        row[0] = (-row[0]) % q
    return rows
