"""Cryptographic primitives and wire records shared by every lesson.

Algorithms are fixed: SHA-256 digests, AES-256-CBC with PKCS#7 padding for
symmetric work, and RSA-2048 with OAEP(SHA-256) for asymmetric work. CBC is
used on purpose: tamper detection must come from the embedded digest, not
from an authenticated cipher mode, or the integrity lesson has nothing to
teach.

Every generator accepts an optional ``random.Random`` so simulations and
golden tests can be replayed byte for byte; without one, all randomness
comes from the operating system's CSPRNG.
"""

from __future__ import annotations

import hashlib
import json
import math
import random
import secrets
from base64 import b64decode, b64encode
from dataclasses import dataclass, field
from enum import Enum

from cryptography.hazmat.primitives import hashes, padding, serialization
from cryptography.hazmat.primitives.asymmetric import padding as rsa_padding
from cryptography.hazmat.primitives.asymmetric import rsa
from cryptography.hazmat.primitives.ciphers import Cipher, algorithms, modes

MAX_MESSAGE_BYTES = 64 * 1024
KEY_BYTES = 32
IV_BYTES = 16
BLOCK_BYTES = 16
RSA_BITS = 2048
RSA_EXPONENT = 65537
# OAEP with SHA-256 on a 2048-bit modulus: 256 - 2*32 - 2
OAEP_MAX_PLAINTEXT = 190


class CryptoError(Exception):
    """Base class for everything raised by this module."""


class MessageTooLong(CryptoError):
    pass


class EmptyPlaintext(CryptoError):
    pass


class PlaintextTooLong(CryptoError):
    pass


class DecryptError(CryptoError):
    """Wrong key, corrupted ciphertext, or broken padding."""


class WireFormatError(CryptoError):
    """A wire record did not parse under its declared format."""


def _rand_bytes(n: int, rng: random.Random | None = None) -> bytes:
    if rng is None:
        return secrets.token_bytes(n)
    return rng.getrandbits(n * 8).to_bytes(n, "big")


def check_message(text: str) -> str:
    """Validate a lesson message: UTF-8 text of at most 64 KiB."""
    if not isinstance(text, str):
        raise MessageTooLong(f"message must be text, got {type(text).__name__}")
    if len(text.encode("utf-8")) > MAX_MESSAGE_BYTES:
        raise MessageTooLong("message exceeds the 64 KiB platform bound")
    return text


# ---------------------------------------------------------------------------
# Digests and envelopes
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Digest:
    """A SHA-256 digest; hex is the canonical rendering."""

    value: bytes

    def __post_init__(self) -> None:
        if len(self.value) != 32:
            raise WireFormatError(f"digest must be 32 bytes, got {len(self.value)}")

    @property
    def hex(self) -> str:
        return self.value.hex()

    @classmethod
    def from_hex(cls, text: str) -> "Digest":
        if len(text) != 64 or text != text.lower():
            raise WireFormatError("digest hex must be 64 lowercase characters")
        try:
            raw = bytes.fromhex(text)
        except ValueError as exc:
            raise WireFormatError("digest is not valid hex") from exc
        return cls(raw)


def hash_message(text: str) -> Digest:
    """SHA-256 over the UTF-8 bytes of the text."""
    check_message(text)
    return Digest(hashlib.sha256(text.encode("utf-8")).digest())


@dataclass(frozen=True)
class Envelope:
    """A message paired with a digest claimed to be its hash."""

    body: str
    digest: Digest


class VerifyResult(Enum):
    ACCEPT = "accept"
    REJECT_TAMPERED = "reject_tampered"


def make_envelope(text: str) -> Envelope:
    return Envelope(body=check_message(text), digest=hash_message(text))


def verify_envelope(envelope: Envelope) -> VerifyResult:
    """Recompute the digest of the body and compare with the claimed one."""
    if hash_message(envelope.body) == envelope.digest:
        return VerifyResult.ACCEPT
    return VerifyResult.REJECT_TAMPERED


# ---------------------------------------------------------------------------
# Symmetric encryption
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SymmetricKey:
    value: bytes
    id: str = field(default="")

    def __post_init__(self) -> None:
        if len(self.value) != KEY_BYTES:
            raise CryptoError(f"symmetric key must be {KEY_BYTES} bytes")
        if not self.id:
            object.__setattr__(self, "id", "k-" + hashlib.sha256(self.value).hexdigest()[:8])


def generate_sym_key(rng: random.Random | None = None) -> SymmetricKey:
    """Fresh 256-bit key; pass a seeded rng to make it reproducible."""
    return SymmetricKey(_rand_bytes(KEY_BYTES, rng))


@dataclass(frozen=True)
class Ciphertext:
    """AES-CBC output: the IV followed by whole padded blocks."""

    iv: bytes
    payload: bytes

    def __post_init__(self) -> None:
        if len(self.iv) != IV_BYTES:
            raise WireFormatError(f"IV must be {IV_BYTES} bytes")
        if len(self.payload) == 0 or len(self.payload) % BLOCK_BYTES != 0:
            raise WireFormatError("payload must be a positive multiple of 16 bytes")

    @property
    def blob(self) -> bytes:
        return self.iv + self.payload

    @property
    def b64(self) -> str:
        return b64encode(self.blob).decode("ascii")

    @classmethod
    def from_blob(cls, blob: bytes) -> "Ciphertext":
        if len(blob) < IV_BYTES + BLOCK_BYTES:
            raise WireFormatError("ciphertext too short")
        return cls(iv=blob[:IV_BYTES], payload=blob[IV_BYTES:])


def sym_encrypt(key: SymmetricKey, plaintext: bytes, rng: random.Random | None = None) -> Ciphertext:
    """AES-256-CBC with a fresh IV and PKCS#7 padding."""
    if not plaintext:
        raise EmptyPlaintext("refusing to encrypt an empty plaintext")
    iv = _rand_bytes(IV_BYTES, rng)
    padder = padding.PKCS7(BLOCK_BYTES * 8).padder()
    padded = padder.update(plaintext) + padder.finalize()
    encryptor = Cipher(algorithms.AES(key.value), modes.CBC(iv)).encryptor()
    return Ciphertext(iv=iv, payload=encryptor.update(padded) + encryptor.finalize())


def sym_decrypt(key: SymmetricKey, ciphertext: Ciphertext) -> bytes:
    """Inverse of :func:`sym_encrypt`; raises DecryptError on bad padding."""
    decryptor = Cipher(algorithms.AES(key.value), modes.CBC(ciphertext.iv)).decryptor()
    padded = decryptor.update(ciphertext.payload) + decryptor.finalize()
    unpadder = padding.PKCS7(BLOCK_BYTES * 8).unpadder()
    try:
        return unpadder.update(padded) + unpadder.finalize()
    except ValueError as exc:
        raise DecryptError("bad padding: wrong key or corrupted ciphertext") from exc


# ---------------------------------------------------------------------------
# Asymmetric encryption
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class KeyPair:
    """An RSA-2048 pair bound to the party that owns it.

    The private half never appears in a wire record; only the DER-encoded
    public half is ever shared on the simulated channel.
    """

    owner: str
    private_key: rsa.RSAPrivateKey

    @property
    def public_key(self) -> rsa.RSAPublicKey:
        return self.private_key.public_key()

    @property
    def public_der(self) -> bytes:
        return self.public_key.public_bytes(
            serialization.Encoding.DER,
            serialization.PublicFormat.SubjectPublicKeyInfo,
        )


_SMALL_PRIMES: list[int] = []


def _small_primes() -> list[int]:
    if not _SMALL_PRIMES:
        sieve = bytearray([1]) * 2000
        sieve[0] = sieve[1] = 0
        for i in range(2, 45):
            if sieve[i]:
                sieve[i * i :: i] = bytearray(len(sieve[i * i :: i]))
        _SMALL_PRIMES.extend(i for i, flag in enumerate(sieve) if flag)
    return _SMALL_PRIMES


def _is_probable_prime(n: int, rng: random.Random, rounds: int = 40) -> bool:
    for p in _small_primes():
        if n % p == 0:
            return n == p
    d, r = n - 1, 0
    while d % 2 == 0:
        d //= 2
        r += 1
    for _ in range(rounds):
        a = rng.randrange(2, n - 2)
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


def _generate_prime(bits: int, rng: random.Random) -> int:
    while True:
        candidate = rng.getrandbits(bits)
        candidate |= (1 << bits - 1) | (1 << bits - 2) | 1
        if math.gcd(candidate - 1, RSA_EXPONENT) != 1:
            continue
        if _is_probable_prime(candidate, rng):
            return candidate


def _deterministic_rsa_key(rng: random.Random) -> rsa.RSAPrivateKey:
    p = _generate_prime(RSA_BITS // 2, rng)
    q = _generate_prime(RSA_BITS // 2, rng)
    while q == p:
        q = _generate_prime(RSA_BITS // 2, rng)
    n = p * q
    phi = (p - 1) * (q - 1)
    d = pow(RSA_EXPONENT, -1, phi)
    numbers = rsa.RSAPrivateNumbers(
        p=p,
        q=q,
        d=d,
        dmp1=d % (p - 1),
        dmq1=d % (q - 1),
        iqmp=pow(q, -1, p),
        public_numbers=rsa.RSAPublicNumbers(RSA_EXPONENT, n),
    )
    return numbers.private_key()


def generate_keypair(owner: str, rng: random.Random | None = None) -> KeyPair:
    """RSA-2048 pair; the seeded path trades speed for reproducibility."""
    if rng is None:
        key = rsa.generate_private_key(public_exponent=RSA_EXPONENT, key_size=RSA_BITS)
    else:
        key = _deterministic_rsa_key(rng)
    return KeyPair(owner=owner, private_key=key)


def _mgf1(seed: bytes, length: int) -> bytes:
    out = b""
    for counter in range(-(-length // 32)):
        out += hashlib.sha256(seed + counter.to_bytes(4, "big")).digest()
    return out[:length]


def _xor(a: bytes, b: bytes) -> bytes:
    return bytes(x ^ y for x, y in zip(a, b))


def asym_encrypt(public_key: rsa.RSAPublicKey, plaintext: bytes, rng: random.Random | None = None) -> bytes:
    """RSA-OAEP(SHA-256) encryption.

    The OAEP encoding is done here rather than in the backend so the pad
    seed can be drawn from an injected rng; decryption goes through the
    library, which keeps the two sides independently checkable.
    """
    numbers = public_key.public_numbers()
    k = (numbers.n.bit_length() + 7) // 8
    if len(plaintext) > k - 2 * 32 - 2:
        raise PlaintextTooLong(f"plaintext exceeds the {k - 66} byte OAEP bound")
    l_hash = hashlib.sha256(b"").digest()
    ps = b"\x00" * (k - len(plaintext) - 2 * 32 - 2)
    db = l_hash + ps + b"\x01" + plaintext
    seed = _rand_bytes(32, rng)
    masked_db = _xor(db, _mgf1(seed, k - 32 - 1))
    masked_seed = _xor(seed, _mgf1(masked_db, 32))
    em = b"\x00" + masked_seed + masked_db
    c = pow(int.from_bytes(em, "big"), numbers.e, numbers.n)
    return c.to_bytes(k, "big")


def asym_decrypt(private_key: rsa.RSAPrivateKey, blob: bytes) -> bytes:
    """Inverse of :func:`asym_encrypt`; raises DecryptError if the key is wrong."""
    try:
        return private_key.decrypt(
            blob,
            rsa_padding.OAEP(
                mgf=rsa_padding.MGF1(algorithm=hashes.SHA256()),
                algorithm=hashes.SHA256(),
                label=None,
            ),
        )
    except ValueError as exc:
        raise DecryptError("asymmetric decryption failed") from exc


# ---------------------------------------------------------------------------
# Credentials
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Credentials:
    username: str
    password: str

    def __post_init__(self) -> None:
        if not self.username or not self.password:
            raise CryptoError("username and password must both be non-empty")


# ---------------------------------------------------------------------------
# Wire records
#
# Canonical encodings, chosen for copy-paste-ability in a terminal UI:
# digests travel as lowercase hex, keys and ciphertexts as base64, and each
# record is a single UTF-8 JSON object with a fixed key order.
# ---------------------------------------------------------------------------

def _record(**fields: object) -> bytes:
    return json.dumps(fields, ensure_ascii=False).encode("utf-8")


def _parse_record(data: bytes, *keys: str) -> dict:
    try:
        obj = json.loads(data.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise WireFormatError(f"not a wire record: {exc}") from exc
    if not isinstance(obj, dict) or set(obj) != set(keys):
        raise WireFormatError(f"expected a record with keys {keys}")
    return obj


def encode_plain(text: str) -> bytes:
    return _record(body=check_message(text))


def decode_plain(data: bytes) -> str:
    obj = _parse_record(data, "body")
    if not isinstance(obj["body"], str):
        raise WireFormatError("body must be text")
    return check_message(obj["body"])


def encode_hash_only(digest: Digest) -> bytes:
    return _record(digest=digest.hex)


def decode_hash_only(data: bytes) -> Digest:
    return Digest.from_hex(str(_parse_record(data, "digest")["digest"]))


def encode_envelope(envelope: Envelope) -> bytes:
    return _record(body=envelope.body, digest=envelope.digest.hex)


def decode_envelope(data: bytes) -> Envelope:
    obj = _parse_record(data, "body", "digest")
    if not isinstance(obj["body"], str):
        raise WireFormatError("body must be text")
    return Envelope(body=check_message(obj["body"]), digest=Digest.from_hex(str(obj["digest"])))


def encode_cipher(blob: bytes) -> bytes:
    return _record(cipher=b64encode(blob).decode("ascii"))


def decode_cipher(data: bytes) -> bytes:
    obj = _parse_record(data, "cipher")
    try:
        return b64decode(str(obj["cipher"]), validate=True)
    except Exception as exc:
        raise WireFormatError("cipher field is not valid base64") from exc


def encode_public_key(pair: KeyPair) -> bytes:
    return _record(owner=pair.owner, public_key=b64encode(pair.public_der).decode("ascii"))


def decode_public_key(data: bytes) -> tuple[str, rsa.RSAPublicKey]:
    obj = _parse_record(data, "owner", "public_key")
    try:
        der = b64decode(str(obj["public_key"]), validate=True)
        key = serialization.load_der_public_key(der)
    except Exception as exc:
        raise WireFormatError("public_key field is not a DER RSA key") from exc
    if not isinstance(key, rsa.RSAPublicKey):
        raise WireFormatError("public_key field is not an RSA key")
    return str(obj["owner"]), key


def encode_key_share(key: SymmetricKey) -> bytes:
    return _record(id=key.id, key=b64encode(key.value).decode("ascii"))


def decode_key_share(data: bytes) -> SymmetricKey:
    obj = _parse_record(data, "id", "key")
    try:
        raw = b64decode(str(obj["key"]), validate=True)
    except Exception as exc:
        raise WireFormatError("key field is not valid base64") from exc
    if len(raw) != KEY_BYTES:
        raise WireFormatError("shared key must be 32 bytes")
    return SymmetricKey(value=raw, id=str(obj["id"]))


def encode_credentials(creds: Credentials) -> bytes:
    return _record(username=creds.username, password=creds.password)


def decode_credentials(data: bytes) -> Credentials:
    obj = _parse_record(data, "username", "password")
    return Credentials(username=str(obj["username"]), password=str(obj["password"]))
