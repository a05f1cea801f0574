"""Signature schemes, content-object signing, MACs and symmetric primitives.

The default signature profile is RSA with a 1024-bit modulus, public
exponent 3 and SHA-256 (PKCS#1 v1.5), matching the target deployment
parameters; schemes are pluggable behind a 1-byte identifier that is
carried as the first byte of every signature field.  A deterministic
"null" scheme (hash-as-signature) exists for codec unit tests only and
must never be accepted in protocol paths.
"""

from __future__ import annotations

import collections
import hashlib
import hmac as hmac_mod
import os
from dataclasses import dataclass

from cryptography.exceptions import InvalidSignature
from cryptography.hazmat.primitives import hashes, serialization
from cryptography.hazmat.primitives.asymmetric import padding, rsa
from cryptography.hazmat.primitives.ciphers import Cipher, algorithms, modes

from .names import Name
from .packets import ContentObject, encode_name

SCHEME_NULL = "null-sha256"
SCHEME_RSA = "rsa1024-sha256"

_SCHEME_IDS = {SCHEME_NULL: 0x00, SCHEME_RSA: 0x01}
_SCHEME_BY_ID = {v: k for k, v in _SCHEME_IDS.items()}

CONTENT_SIG_DOMAIN = b"lumen-content-v1"


# Running tallies by operation kind, so harness metrics can report how
# many signatures and MACs a run actually cost.
TALLY = collections.Counter()


def tally_snapshot() -> dict:
    return dict(TALLY)


class CryptoError(Exception):
    pass


class SchemeMismatch(CryptoError):
    """Signature scheme of key and object disagree."""


@dataclass(frozen=True)
class PublicKey:
    algorithm: str
    material: bytes  # DER SubjectPublicKeyInfo for RSA; opaque for null

    def fingerprint(self) -> bytes:
        return hashlib.sha256(self.material).digest()


@dataclass(frozen=True)
class KeyPair:
    algorithm: str
    material: bytes  # DER PKCS#8 for RSA; opaque for null
    public: PublicKey


def generate_keypair(algorithm: str = SCHEME_RSA, rng=None) -> KeyPair:
    """Fresh keypair; pass a seeded random.Random to make generation
    reproducible (simulations must replay byte-identically under one seed)."""
    if algorithm == SCHEME_RSA:
        if rng is None:
            sk = rsa.generate_private_key(public_exponent=3, key_size=1024)
        else:
            sk = _seeded_rsa_key(rng)
        priv = sk.private_bytes(
            serialization.Encoding.DER,
            serialization.PrivateFormat.PKCS8,
            serialization.NoEncryption(),
        )
        pub = sk.public_key().public_bytes(
            serialization.Encoding.DER, serialization.PublicFormat.SubjectPublicKeyInfo
        )
        return KeyPair(algorithm, priv, PublicKey(algorithm, pub))
    if algorithm == SCHEME_NULL:
        # Keyless by construction; material only distinguishes identities.
        material = rng.randbytes(8) if rng is not None else os.urandom(8)
        return KeyPair(algorithm, material, PublicKey(algorithm, material))
    raise CryptoError(f"unknown scheme {algorithm!r}")


# Witness set covering 512-bit candidates far beyond practical doubt.
_MR_BASES = (2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37)


def _is_probable_prime(n: int) -> bool:
    if n < 2:
        return False
    for p in _MR_BASES:
        if n % p == 0:
            return n == p
    d, r = n - 1, 0
    while d % 2 == 0:
        d //= 2
        r += 1
    for a in _MR_BASES:
        x = pow(a, d, n)
        if x in (1, n - 1):
            continue
        for _ in range(r - 1):
            x = pow(x, 2, n)
            if x == n - 1:
                break
        else:
            return False
    return True


def _seeded_prime(bits: int, rng) -> int:
    while True:
        cand = rng.getrandbits(bits) | (1 << (bits - 1)) | 1
        # e=3 demands gcd(3, p-1) == 1, so p == 2 (mod 3).
        if cand % 3 != 2:
            continue
        if _is_probable_prime(cand):
            return cand


def _seeded_rsa_key(rng, bits: int = 1024):
    p = _seeded_prime(bits // 2, rng)
    q = _seeded_prime(bits // 2, rng)
    while q == p:
        q = _seeded_prime(bits // 2, rng)
    if p < q:
        p, q = q, p
    e = 3
    d = pow(e, -1, (p - 1) * (q - 1))
    numbers = rsa.RSAPrivateNumbers(
        p=p,
        q=q,
        d=d,
        dmp1=d % (p - 1),
        dmq1=d % (q - 1),
        iqmp=pow(q, -1, p),
        public_numbers=rsa.RSAPublicNumbers(e, p * q),
    )
    return numbers.private_key()


def _load_private(kp: KeyPair):
    return serialization.load_der_private_key(kp.material, password=None)


def _load_public(pk: PublicKey):
    return serialization.load_der_public_key(pk.material)


def sign_raw(kp: KeyPair, message: bytes) -> bytes:
    """Sign a message; output carries the 1-byte scheme id up front."""
    TALLY["sign"] += 1
    sid = bytes([_SCHEME_IDS[kp.algorithm]])
    if kp.algorithm == SCHEME_RSA:
        sig = _load_private(kp).sign(message, padding.PKCS1v15(), hashes.SHA256())
        return sid + sig
    if kp.algorithm == SCHEME_NULL:
        return sid + hashlib.sha256(message).digest()
    raise CryptoError(f"unknown scheme {kp.algorithm!r}")


def verify_raw(pk: PublicKey, message: bytes, signature: bytes) -> bool:
    TALLY["verify"] += 1
    if not signature:
        return False
    scheme = _SCHEME_BY_ID.get(signature[0])
    if scheme is None or scheme != pk.algorithm:
        raise SchemeMismatch(f"key scheme {pk.algorithm!r} vs signature scheme {scheme!r}")
    body = signature[1:]
    if pk.algorithm == SCHEME_RSA:
        try:
            _load_public(pk).verify(body, message, padding.PKCS1v15(), hashes.SHA256())
            return True
        except InvalidSignature:
            return False
        except ValueError:
            return False
    if pk.algorithm == SCHEME_NULL:
        return hmac_mod.compare_digest(body, hashlib.sha256(message).digest())
    raise CryptoError(f"unknown scheme {pk.algorithm!r}")


def content_signing_input(obj: ContentObject) -> bytes:
    return CONTENT_SIG_DOMAIN + encode_name(obj.name) + obj.payload + encode_name(obj.key_locator)


def sign_content(kp: KeyPair, obj: ContentObject) -> ContentObject:
    """Return a copy of obj with its signature filled in.

    Precondition: obj.signature is empty.
    """
    if obj.signature:
        raise CryptoError("object already signed")
    sig = sign_raw(kp, content_signing_input(obj))
    return ContentObject(
        name=obj.name,
        payload=obj.payload,
        key_locator=obj.key_locator,
        signature=sig,
        timestamp_ms=obj.timestamp_ms,
    )


def verify_content(pk: PublicKey, obj: ContentObject) -> bool:
    if not obj.signature:
        return False
    return verify_raw(pk, content_signing_input(obj), obj.signature)


# --- MAC / PRF -------------------------------------------------------------

MAC_LEN = 32


def mac(key: bytes, message: bytes) -> bytes:
    TALLY["mac"] += 1
    return hmac_mod.digest(key, message, "sha256")


def mac_verify(key: bytes, message: bytes, tag: bytes) -> bool:
    TALLY["mac_verify"] += 1
    return hmac_mod.compare_digest(hmac_mod.digest(key, message, "sha256"), tag)


def prf(key: bytes, message: bytes) -> bytes:
    """Keyed 256-bit PRF (HMAC-SHA256); used for per-application key derivation."""
    return hmac_mod.digest(key, message, "sha256")


def sha256(data: bytes) -> bytes:
    return hashlib.sha256(data).digest()


def bytes_eq(a: bytes, b: bytes) -> bool:
    """Constant-time equality for secrets and authenticators."""
    return hmac_mod.compare_digest(a, b)


# --- Block cipher helpers --------------------------------------------------

BLOCK_LEN = 16  # AES-128 block size: the s-bit challenge secret


def aes_block_encrypt(key: bytes, block: bytes) -> bytes:
    """Single-block AES-128 (the only place raw ECB is appropriate)."""
    if len(key) != 16 or len(block) != 16:
        raise CryptoError("AES-128 single-block ops need 16-byte key and block")
    enc = Cipher(algorithms.AES(key), modes.ECB()).encryptor()
    return enc.update(block) + enc.finalize()


def aes_block_decrypt(key: bytes, block: bytes) -> bytes:
    if len(key) != 16 or len(block) != 16:
        raise CryptoError("AES-128 single-block ops need 16-byte key and block")
    dec = Cipher(algorithms.AES(key), modes.ECB()).decryptor()
    return dec.update(block) + dec.finalize()


def aes_ctr_encrypt(key: bytes, nonce: bytes, data: bytes) -> bytes:
    if len(key) != 16 or len(nonce) != 16:
        raise CryptoError("need 16-byte key and nonce")
    enc = Cipher(algorithms.AES(key), modes.CTR(nonce)).encryptor()
    return enc.update(data) + enc.finalize()


aes_ctr_decrypt = aes_ctr_encrypt  # CTR is an involution


# --- Public-key encryption (key handoff, command privacy) ------------------


def rsa_encrypt(pk: PublicKey, plaintext: bytes) -> bytes:
    """OAEP-SHA256; fits up to 62 bytes under a 1024-bit modulus."""
    if pk.algorithm != SCHEME_RSA:
        raise SchemeMismatch(f"cannot RSA-encrypt under {pk.algorithm!r}")
    pad = padding.OAEP(padding.MGF1(hashes.SHA256()), hashes.SHA256(), None)
    return _load_public(pk).encrypt(plaintext, pad)


def rsa_decrypt(kp: KeyPair, ciphertext: bytes) -> bytes:
    if kp.algorithm != SCHEME_RSA:
        raise SchemeMismatch(f"cannot RSA-decrypt under {kp.algorithm!r}")
    pad = padding.OAEP(padding.MGF1(hashes.SHA256()), hashes.SHA256(), None)
    return _load_private(kp).decrypt(ciphertext, pad)


def serialize_public(pk: PublicKey) -> bytes:
    """Wire form of a public key: scheme id byte + key material."""
    return bytes([_SCHEME_IDS[pk.algorithm]]) + pk.material


def deserialize_public(data: bytes) -> PublicKey:
    if not data:
        raise CryptoError("empty public key blob")
    scheme = _SCHEME_BY_ID.get(data[0])
    if scheme is None:
        raise CryptoError(f"unknown scheme id 0x{data[0]:02x}")
    return PublicKey(scheme, data[1:])


def encode_name_bytes(name: Name) -> bytes:
    """Canonical byte form of a name for keyed derivations."""
    return encode_name(name)
