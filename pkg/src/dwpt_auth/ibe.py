"""Identity-based encryption and signatures over an NTRU trapdoor.

A master authority samples a short pair (f, g), completes it to a basis of
the lattice {(u, v) : u + v*h = 0 mod q} for h = g/f, and extracts per
identity a short preimage (s1, s2) of the hashed identity point with a
randomized nearest-plane sampler over the Gram-Schmidt frame.  Encryption is
the dual-Regev style scheme: noisy products against h and the identity point,
message bits scaled by floor(q/2).

Key encapsulation for byte payloads wraps a fresh 256-bit content key in as
many ring ciphertexts as needed and seals the payload itself with an AEAD.
"""

from __future__ import annotations

import hashlib
import math
import struct
from dataclasses import dataclass, field

import numpy as np

from dwpt_auth.errors import (
    AuthenticationFailure,
    NotInvertible,
    ParameterMismatch,
    ResampleExhausted,
    SamplerFailure,
)
from dwpt_auth.ntrusolve import _fft_neg, ntru_solve
from dwpt_auth.ring import (
    IntegerPolynomial,
    RingElement,
    RingParams,
    hash_to_ring,
    sample_gaussian_int,
    sample_gaussian_poly,
)
from dwpt_auth.rng import RandomSource
from dwpt_auth.symcrypto import aead_open, aead_seal

#: Width of the encryption noise polynomials r, e1, e2.
ENC_SIGMA = 1.5

#: A key pair is accepted only if the Gram-Schmidt norm of its basis stays
#: below this multiple of sqrt(q); keeps the extraction width sigma_extract
#: comfortably above the basis quality.
GS_SLACK = 1.3

_ID_PREFIX = b"ID\x00"
_SIG_PREFIX = b"SIG\x00"

_MAX_KEYGEN_ATTEMPTS = 400
_MAX_SAMPLE_ATTEMPTS = 64


def norm_bound(params: RingParams) -> float:
    """Acceptance bound on ||(s1, s2)|| for extracted keys and signatures."""
    return 1.1 * params.sigma_extract * math.sqrt(2 * params.N)


def identity_point(params: RingParams, identity: bytes) -> RingElement:
    """Hash an identity string onto the ring (domain-separated)."""
    return hash_to_ring(_ID_PREFIX + identity, params)


@dataclass(frozen=True)
class MasterPublicKey:
    params: RingParams
    h: RingElement


@dataclass
class MasterSecretKey:
    params: RingParams
    f: IntegerPolynomial
    g: IntegerPolynomial
    F: IntegerPolynomial
    G: IntegerPolynomial
    extract_seed: bytes
    _sampler: "KleinSampler | None" = field(default=None, repr=False, compare=False)
    _extract_cache: dict = field(default_factory=dict, repr=False, compare=False)

    def basis(self) -> np.ndarray:
        """Rows span {(u, v): u + v*h = 0 mod q}; blocks [g | -f; G | -F]."""
        N = self.params.N
        B = np.zeros((2 * N, 2 * N), dtype=np.int64)
        for i in range(N):
            B[i, :N] = _rotate_row(self.g, i)
            B[i, N:] = -_rotate_row(self.f, i)
            B[N + i, :N] = _rotate_row(self.G, i)
            B[N + i, N:] = -_rotate_row(self.F, i)
        return B

    def sampler(self) -> "KleinSampler":
        if self._sampler is None:
            self._sampler = KleinSampler(self.basis())
        return self._sampler


def _rotate_row(poly: IntegerPolynomial, i: int) -> np.ndarray:
    """Coefficient vector of x^i * poly over Z (negacyclic wrap)."""
    c = poly.coeffs
    n = len(c)
    row = np.empty(n, dtype=np.int64)
    row[i:] = c[: n - i]
    row[:i] = [-v for v in c[n - i :]]
    return row


@dataclass(frozen=True)
class UserSecretKey:
    identity: bytes
    s1: RingElement
    s2: RingElement

    @property
    def params(self) -> RingParams:
        return self.s1.params


@dataclass(frozen=True)
class Signature:
    salt: bytes
    s1: RingElement
    s2: RingElement


@dataclass(frozen=True)
class Ciphertext:
    """One ring ciphertext carrying up to N bits."""

    u: RingElement
    v: RingElement
    payload_kind: str = "raw-bits"

    def to_bytes(self) -> bytes:
        kind = self.payload_kind.encode()
        ub, vb = self.u.to_bytes(), self.v.to_bytes()
        return struct.pack("<B", len(kind)) + kind + struct.pack("<I", len(ub)) + ub + vb

    @classmethod
    def from_bytes(cls, data: bytes, params: RingParams) -> "Ciphertext":
        klen = data[0]
        kind = data[1 : 1 + klen].decode()
        (ulen,) = struct.unpack_from("<I", data, 1 + klen)
        off = 5 + klen
        u = RingElement.from_bytes(data[off : off + ulen], params)
        v = RingElement.from_bytes(data[off + ulen :], params)
        return cls(u, v, kind)


@dataclass(frozen=True)
class HybridCiphertext:
    """Content key encapsulated in ring blocks; payload sealed with an AEAD."""

    key_blocks: tuple
    sealed: bytes

    def to_bytes(self) -> bytes:
        out = bytearray(struct.pack("<B", len(self.key_blocks)))
        for block in self.key_blocks:
            bb = block.to_bytes()
            out += struct.pack("<I", len(bb)) + bb
        out += struct.pack("<I", len(self.sealed)) + self.sealed
        return bytes(out)

    @classmethod
    def from_bytes(cls, data: bytes, params: RingParams) -> "HybridCiphertext":
        n_blocks = data[0]
        off = 1
        blocks = []
        for _ in range(n_blocks):
            (blen,) = struct.unpack_from("<I", data, off)
            off += 4
            blocks.append(Ciphertext.from_bytes(data[off : off + blen], params))
            off += blen
        (slen,) = struct.unpack_from("<I", data, off)
        off += 4
        return cls(tuple(blocks), data[off : off + slen])


# ---------------------------------------------------------------------------
# Master key generation

def _gs_quality(f: IntegerPolynomial, g: IntegerPolynomial, q: int) -> float:
    """Gram-Schmidt norm of the would-be basis, via the two-norm identity.

    The first half of the orthogonalized rows peaks at ||(g, -f)||; the
    second half at sqrt(sum_k q^2 / (|f_k|^2 + |g_k|^2)) over the Fourier
    points, so both are available before solving for (F, G).
    """
    norm1_sq = f.norm_squared() + g.norm_squared()
    f_hat = _fft_neg(np.array(f.coeffs, dtype=np.float64))
    g_hat = _fft_neg(np.array(g.coeffs, dtype=np.float64))
    den = np.abs(f_hat) ** 2 + np.abs(g_hat) ** 2
    if np.any(den < 1e-12):
        return float("inf")
    # Parseval: coefficient-domain norm^2 is the Fourier-point mean, not sum.
    norm2_sq = float(np.sum(q * q / den)) / len(f.coeffs)
    return math.sqrt(max(float(norm1_sq), norm2_sq))


def master_key_gen(
    params: RingParams, rng: RandomSource
) -> tuple[MasterPublicKey, MasterSecretKey]:
    """Sample a trapdoor basis and publish h = g * f^-1 mod q.

    Rejects candidate (f, g) pairs whose basis quality exceeds
    GS_SLACK * sqrt(q) or whose f is not invertible mod q; raises
    ResampleExhausted if no candidate passes.
    """
    q = params.q
    bound = GS_SLACK * math.sqrt(q)
    for _ in range(_MAX_KEYGEN_ATTEMPTS):
        f = sample_gaussian_poly(params, params.sigma_f, rng)
        g = sample_gaussian_poly(params, params.sigma_f, rng)
        if _gs_quality(f, g, q) > bound:
            continue
        try:
            f_inv = f.to_ring(params).inverse()
        except NotInvertible:
            continue
        try:
            F_c, G_c = ntru_solve(f.coeffs, g.coeffs, q)
        except NotInvertible:
            continue
        F, G = IntegerPolynomial(F_c), IntegerPolynomial(G_c)
        check = f.mul_mod_phi(G) - g.mul_mod_phi(F)
        if check.coeffs[0] != q or any(c != 0 for c in check.coeffs[1:]):
            continue
        h = g.to_ring(params) * f_inv
        msk = MasterSecretKey(
            params=params, f=f, g=g, F=F, G=G, extract_seed=rng.bytes(32)
        )
        return MasterPublicKey(params=params, h=h), msk
    raise ResampleExhausted(
        f"no acceptable key pair in {_MAX_KEYGEN_ATTEMPTS} attempts"
    )


# ---------------------------------------------------------------------------
# Randomized nearest-plane sampling

class KleinSampler:
    """Discrete Gaussian sampler over the lattice spanned by a short basis.

    Precomputes the Gram-Schmidt frame once (classical orthogonalization with
    a second correction pass for float stability) and then draws lattice
    points near arbitrary targets.
    """

    def __init__(self, basis: np.ndarray):
        self.basis = basis
        n = basis.shape[0]
        B = basis.astype(np.float64)
        Bstar = np.empty_like(B)
        norms2 = np.empty(n)
        for i in range(n):
            b = B[i]
            if i:
                prev = Bstar[:i]
                b = b - (prev @ b / norms2[:i]) @ prev
                b = b - (prev @ b / norms2[:i]) @ prev
            Bstar[i] = b
            norms2[i] = b @ b
        self.Bstar = Bstar
        self.norms2 = norms2

    @property
    def max_gs_norm(self) -> float:
        return math.sqrt(float(self.norms2.max()))

    def sample_near(
        self, target: np.ndarray, sigma: float, rng: RandomSource
    ) -> np.ndarray:
        """Integer lattice point distributed around `target` with width sigma."""
        basis = self.basis
        c = target.astype(np.float64, copy=True)
        v = np.zeros(basis.shape[1], dtype=np.int64)
        for i in range(basis.shape[0] - 1, -1, -1):
            center = float(c @ self.Bstar[i]) / self.norms2[i]
            step_sigma = sigma / math.sqrt(self.norms2[i])
            z = sample_gaussian_int(center, step_sigma, rng)
            if z:
                c -= z * basis[i].astype(np.float64)
                v += z * basis[i]
        return v


def _sample_preimage(
    msk: MasterSecretKey, t: RingElement, rng: RandomSource
) -> tuple[RingElement, RingElement]:
    """Short (s1, s2) with s1 + s2*h = t mod q, norm below norm_bound."""
    params = msk.params
    N = params.N
    sampler = msk.sampler()
    target = np.zeros(2 * N, dtype=np.int64)
    target[:N] = t.coeffs
    bound_sq = norm_bound(params) ** 2
    for _ in range(_MAX_SAMPLE_ATTEMPTS):
        v = sampler.sample_near(target, params.sigma_extract, rng)
        s = target - v
        if float(s @ s) > bound_sq:
            continue
        s1 = RingElement(params, s[:N])
        s2 = RingElement(params, s[N:])
        return s1, s2
    raise SamplerFailure("no preimage within the norm bound")


def extract(msk: MasterSecretKey, identity: bytes) -> UserSecretKey:
    """Derive the secret key for an identity (deterministic per authority).

    Randomness is re-derived from the master extraction seed and the identity
    digest, so repeated extractions return the identical key regardless of
    call order.
    """
    cached = msk._extract_cache.get(identity)
    if cached is not None:
        return cached
    params = msk.params
    t = identity_point(params, identity)
    digest = hashlib.sha256(identity).digest()
    rng = RandomSource(b"extract" + msk.extract_seed + digest)
    s1, s2 = _sample_preimage(msk, t, rng)
    usk = UserSecretKey(identity=identity, s1=s1, s2=s2)
    msk._extract_cache[identity] = usk
    return usk


# ---------------------------------------------------------------------------
# Encryption

def encrypt(
    mpk: MasterPublicKey,
    identity: bytes,
    bits,
    rng: RandomSource,
    payload_kind: str = "raw-bits",
) -> Ciphertext:
    """Encrypt up to N bits to an identity."""
    params = mpk.params
    bits = list(bits)
    if len(bits) != params.N or any(b not in (0, 1) for b in bits):
        raise ValueError(f"message must be exactly {params.N} bits")
    t = identity_point(params, identity)
    r = sample_gaussian_poly(params, ENC_SIGMA, rng).to_ring(params)
    e1 = sample_gaussian_poly(params, ENC_SIGMA, rng).to_ring(params)
    e2 = sample_gaussian_poly(params, ENC_SIGMA, rng).to_ring(params)
    half = params.q // 2
    m = RingElement(params, [b * half for b in bits])
    u = r * mpk.h + e1
    v = r * t + e2 + m
    return Ciphertext(u=u, v=v, payload_kind=payload_kind)


def decrypt(usk: UserSecretKey, ct: Ciphertext) -> list[int]:
    """Recover the bit vector; bit i is 1 when w_i lies nearer q/2 than 0."""
    if usk.params != ct.u.params:
        raise ParameterMismatch("key and ciphertext parameters differ")
    q = usk.params.q
    w = ct.v - ct.u * usk.s2
    centered = w.centered()
    return [1 if abs(int(c)) > q // 4 else 0 for c in centered]


# ---------------------------------------------------------------------------
# Signatures

def sign(msk: MasterSecretKey, message: bytes, rng: RandomSource) -> Signature:
    """Salted hash-and-preimage signature under the master trapdoor."""
    salt = rng.bytes(32)
    t = hash_to_ring(_SIG_PREFIX + salt + message, msk.params)
    s1, s2 = _sample_preimage(msk, t, rng)
    return Signature(salt=salt, s1=s1, s2=s2)


def verify(mpk: MasterPublicKey, message: bytes, sig: Signature) -> bool:
    """Check the norm bound and the preimage equation s1 + s2*h = t."""
    params = mpk.params
    if sig.s1.params != params or sig.s2.params != params:
        return False
    t = hash_to_ring(_SIG_PREFIX + sig.salt + message, params)
    norm_sq = sig.s1.norm_squared() + sig.s2.norm_squared()
    if norm_sq > norm_bound(params) ** 2:
        return False
    return sig.s1 + sig.s2 * mpk.h == t


# ---------------------------------------------------------------------------
# Hybrid encryption of byte payloads

_CONTENT_KEY_BITS = 256


def _key_to_blocks(key: bytes, N: int) -> list[list[int]]:
    bits = [(key[i // 8] >> (i % 8)) & 1 for i in range(_CONTENT_KEY_BITS)]
    n_blocks = -(-_CONTENT_KEY_BITS // N)
    padded = bits + [0] * (n_blocks * N - len(bits))
    return [padded[i * N : (i + 1) * N] for i in range(n_blocks)]


def _blocks_to_key(blocks: list[list[int]]) -> bytes:
    bits = [b for block in blocks for b in block][:_CONTENT_KEY_BITS]
    out = bytearray(_CONTENT_KEY_BITS // 8)
    for i, bit in enumerate(bits):
        out[i // 8] |= bit << (i % 8)
    return bytes(out)


def ibe_seal(
    mpk: MasterPublicKey,
    identity: bytes,
    plaintext: bytes,
    rng: RandomSource,
    associated_data: bytes = b"",
) -> HybridCiphertext:
    """Encrypt an arbitrary byte payload to an identity.

    A fresh 256-bit content key is encapsulated in ceil(256/N) ring blocks
    (zero-padded when N > 256); the payload is sealed under that key.
    """
    content_key = rng.bytes(32)
    blocks = [
        encrypt(mpk, identity, block_bits, rng, payload_kind="key-encapsulation")
        for block_bits in _key_to_blocks(content_key, mpk.params.N)
    ]
    sealed = aead_seal(content_key, plaintext, rng, associated_data)
    return HybridCiphertext(key_blocks=tuple(blocks), sealed=sealed)


def ibe_open(
    usk: UserSecretKey, ct: HybridCiphertext, associated_data: bytes = b""
) -> bytes:
    """Inverse of ibe_seal; AuthenticationFailure when the payload does not
    decrypt cleanly (wrong identity key or tampered bytes)."""
    blocks = [decrypt(usk, block) for block in ct.key_blocks]
    content_key = _blocks_to_key(blocks)
    return aead_open(content_key, ct.sealed, associated_data)
