"""Identity-based layer: trapdoor generation, extraction, encryption, signing."""

import math

import numpy as np
import pytest

from dwpt_auth.errors import AuthenticationFailure, ParameterMismatch
from dwpt_auth.ibe import (
    Ciphertext,
    HybridCiphertext,
    KleinSampler,
    Signature,
    _blocks_to_key,
    _key_to_blocks,
    decrypt,
    encrypt,
    extract,
    ibe_open,
    ibe_seal,
    identity_point,
    master_key_gen,
    norm_bound,
    sign,
    verify,
)
from dwpt_auth.ring import RingElement, TIERS, ring_mul
from dwpt_auth.rng import RandomSource


def random_bits(n, rng):
    return [rng.below(2) for _ in range(n)]


class TestMasterKeyGen:
    def test_public_key_relation(self, toy_authority):
        mpk, msk = toy_authority.mpk, toy_authority.msk
        p = mpk.params
        # h * f = g mod q
        assert ring_mul(mpk.h, msk.f.to_ring(p)) == msk.g.to_ring(p)

    def test_lattice_determinant(self, toy_authority):
        msk = toy_authority.msk
        check = msk.f.mul_mod_phi(msk.G) - msk.g.mul_mod_phi(msk.F)
        assert check.coeffs == [msk.params.q] + [0] * (msk.params.N - 1)

    def test_basis_rows_annihilate_h(self, toy_authority):
        """Every row (u, v) must satisfy u + v*h = 0 mod q."""
        mpk, msk = toy_authority.mpk, toy_authority.msk
        p = mpk.params
        B = msk.basis()
        for i in range(2 * p.N):
            u = RingElement(p, B[i, : p.N])
            v = RingElement(p, B[i, p.N :])
            assert (u + v * mpk.h).is_zero()

    def test_basis_quality_within_slack(self, toy_authority):
        msk = toy_authority.msk
        sampler = KleinSampler(msk.basis())
        assert sampler.max_gs_norm <= 1.3 * math.sqrt(msk.params.q)

    def test_deterministic_per_seed(self):
        p = TIERS["toy"]
        mpk1, _ = master_key_gen(p, RandomSource("kg"))
        mpk2, _ = master_key_gen(p, RandomSource("kg"))
        mpk3, _ = master_key_gen(p, RandomSource("other"))
        assert mpk1.h == mpk2.h
        assert mpk1.h != mpk3.h


class TestExtract:
    def test_preimage_equation(self, test_authority):
        mpk, msk = test_authority.mpk, test_authority.msk
        usk = extract(msk, b"vehicle-77")
        t = identity_point(mpk.params, b"vehicle-77")
        assert usk.s1 + usk.s2 * mpk.h == t

    def test_norm_within_bound(self, test_authority):
        usk = extract(test_authority.msk, b"vehicle-77")
        norm_sq = usk.s1.norm_squared() + usk.s2.norm_squared()
        assert norm_sq <= norm_bound(usk.params) ** 2

    def test_extraction_is_deterministic(self, test_authority):
        msk = test_authority.msk
        first = extract(msk, b"repeat-me")
        assert extract(msk, b"repeat-me") is first  # cache hit
        msk._extract_cache.pop(b"repeat-me")
        again = extract(msk, b"repeat-me")
        assert again is not first
        assert again.s1 == first.s1 and again.s2 == first.s2

    def test_distinct_identities_get_distinct_keys(self, test_authority):
        a = extract(test_authority.msk, b"id-a")
        b = extract(test_authority.msk, b"id-b")
        assert a.s1 != b.s1


class TestKleinSampler:
    def test_returns_lattice_points_near_target(self, toy_authority):
        msk = toy_authority.msk
        p = msk.params
        sampler = msk.sampler()
        rng = RandomSource("klein")
        h = toy_authority.mpk.h
        target = np.zeros(2 * p.N, dtype=np.int64)
        target[0] = p.q // 3
        dists = []
        for _ in range(40):
            v = sampler.sample_near(target, p.sigma_extract, rng)
            # lattice membership: (v1, v2) with v1 + v2*h = 0 mod q
            v1 = RingElement(p, v[: p.N])
            v2 = RingElement(p, v[p.N :])
            assert (v1 + v2 * h).is_zero()
            d = target - v
            dists.append(math.sqrt(float(d @ d)))
        # Gaussian of width sigma in 2N dims concentrates near sigma*sqrt(2N)
        expected = p.sigma_extract * math.sqrt(2 * p.N)
        assert np.mean(dists) < 1.5 * expected


class TestEncryptDecrypt:
    def test_round_trip_default_tier(self, default_authority):
        mpk, msk = default_authority.mpk, default_authority.msk
        usk = extract(msk, b"round-trip")
        rng = RandomSource("enc")
        for _ in range(5):
            bits = random_bits(mpk.params.N, rng)
            ct = encrypt(mpk, b"round-trip", bits, rng)
            assert decrypt(usk, ct) == bits

    def test_wrong_identity_garbles(self, default_authority):
        mpk, msk = default_authority.mpk, default_authority.msk
        rng = RandomSource("cross")
        bits = random_bits(mpk.params.N, rng)
        ct = encrypt(mpk, b"alice", bits, rng)
        other = extract(msk, b"mallory")
        assert decrypt(other, ct) != bits

    def test_small_tier_noise_margin_is_reported(self, test_authority):
        """Narrow-modulus tiers decode noisily by design; measure the rate."""
        mpk, msk = test_authority.mpk, test_authority.msk
        usk = extract(msk, b"noisy")
        rng = RandomSource("noise")
        trials, bad_bits, total_bits = 10, 0, 0
        for _ in range(trials):
            bits = random_bits(mpk.params.N, rng)
            got = decrypt(usk, encrypt(mpk, b"noisy", bits, rng))
            bad_bits += sum(a != b for a, b in zip(bits, got))
            total_bits += len(bits)
        rate = bad_bits / total_bits
        print(f"\n[test tier] bit error rate {rate:.3f} ({bad_bits}/{total_bits})")
        assert 0.0 <= rate < 0.5  # decodes better than coin flips even here

    def test_message_length_enforced(self, default_authority):
        mpk = default_authority.mpk
        with pytest.raises(ValueError):
            encrypt(mpk, b"x", [0] * (mpk.params.N - 1), RandomSource(1))
        with pytest.raises(ValueError):
            encrypt(mpk, b"x", [2] * mpk.params.N, RandomSource(1))

    def test_params_mismatch_rejected(self, default_authority, toy_authority):
        rng = RandomSource("mix")
        toy_mpk = toy_authority.mpk
        ct = encrypt(toy_mpk, b"x", random_bits(toy_mpk.params.N, rng), rng)
        usk = extract(default_authority.msk, b"x")
        with pytest.raises(ParameterMismatch):
            decrypt(usk, ct)


class TestSignatures:
    def test_sign_verify(self, test_authority):
        mpk, msk = test_authority.mpk, test_authority.msk
        sig = sign(msk, b"charging receipt", RandomSource("sig"))
        assert verify(mpk, b"charging receipt", sig)

    def test_tampered_message_rejected(self, test_authority):
        mpk, msk = test_authority.mpk, test_authority.msk
        sig = sign(msk, b"amount=10", RandomSource("sig2"))
        assert not verify(mpk, b"amount=99", sig)

    def test_tampered_salt_rejected(self, test_authority):
        mpk, msk = test_authority.mpk, test_authority.msk
        sig = sign(msk, b"msg", RandomSource("sig3"))
        forged = Signature(salt=bytes(32), s1=sig.s1, s2=sig.s2)
        assert not verify(mpk, b"msg", forged)

    def test_oversized_preimage_rejected(self, test_authority):
        """A correct equation with a long vector must still fail the check."""
        mpk, msk = test_authority.mpk, test_authority.msk
        p = mpk.params
        rng = RandomSource("sig4")
        salt = rng.bytes(32)
        from dwpt_auth.ring import hash_to_ring

        t = hash_to_ring(b"SIG\x00" + salt + b"msg", p)
        # trivial preimage: s1 = t, s2 = 0 -- valid equation, huge norm
        forged = Signature(salt=salt, s1=t, s2=RingElement.zero(p))
        assert forged.s1 + forged.s2 * mpk.h == t
        assert not verify(mpk, b"msg", forged)

    def test_wrong_authority_rejected(self, test_authority):
        p = TIERS["test"]
        other_mpk, _ = master_key_gen(p, RandomSource("other-authority"))
        sig = sign(test_authority.msk, b"msg", RandomSource("sig5"))
        assert not verify(other_mpk, b"msg", sig)


class TestHybrid:
    def test_seal_open_round_trip(self, default_authority):
        mpk, msk = default_authority.mpk, default_authority.msk
        usk = extract(msk, b"recipient")
        rng = RandomSource("seal")
        msg = b"arbitrary length payload " * 9
        ct = ibe_seal(mpk, b"recipient", msg, rng, b"frame")
        assert ibe_open(usk, ct, b"frame") == msg

    def test_key_block_count(self, default_authority):
        mpk = default_authority.mpk
        ct = ibe_seal(mpk, b"r", b"x", RandomSource("blocks"))
        assert len(ct.key_blocks) == -(-256 // mpk.params.N)

    def test_wrong_recipient_rejected(self, default_authority):
        mpk, msk = default_authority.mpk, default_authority.msk
        ct = ibe_seal(mpk, b"alice", b"secret", RandomSource("s2"))
        eve = extract(msk, b"eve")
        with pytest.raises(AuthenticationFailure):
            ibe_open(eve, ct)

    def test_wrong_aad_rejected(self, default_authority):
        mpk, msk = default_authority.mpk, default_authority.msk
        usk = extract(msk, b"bob")
        ct = ibe_seal(mpk, b"bob", b"secret", RandomSource("s3"), b"aad-1")
        with pytest.raises(AuthenticationFailure):
            ibe_open(usk, ct, b"aad-2")

    def test_tampered_payload_rejected(self, default_authority):
        mpk, msk = default_authority.mpk, default_authority.msk
        usk = extract(msk, b"bob")
        ct = ibe_seal(mpk, b"bob", b"secret", RandomSource("s4"))
        sealed = bytearray(ct.sealed)
        sealed[-1] ^= 1
        tampered = HybridCiphertext(key_blocks=ct.key_blocks, sealed=bytes(sealed))
        with pytest.raises(AuthenticationFailure):
            ibe_open(usk, tampered)

    @pytest.mark.parametrize("n", [16, 64, 512])
    def test_key_block_packing_round_trip(self, n):
        key = RandomSource(f"pack-{n}").bytes(32)
        assert _blocks_to_key(_key_to_blocks(key, n)) == key


class TestSerialization:
    def test_ciphertext_round_trip(self, test_authority):
        mpk = test_authority.mpk
        rng = RandomSource("ctser")
        ct = encrypt(mpk, b"x", random_bits(mpk.params.N, rng), rng, "key-encapsulation")
        back = Ciphertext.from_bytes(ct.to_bytes(), mpk.params)
        assert back == ct
        assert back.payload_kind == "key-encapsulation"

    def test_hybrid_round_trip(self, test_authority):
        mpk = test_authority.mpk
        ct = ibe_seal(mpk, b"dest", b"payload bytes", RandomSource("hser"))
        back = HybridCiphertext.from_bytes(ct.to_bytes(), mpk.params)
        assert back == ct
