"""Anchor mitigations: salted commitments and sealed (ephemeral-key) ciphertexts."""

from __future__ import annotations

import hmac
from dataclasses import dataclass

from cryptography.exceptions import InvalidTag
from cryptography.hazmat.primitives import hashes
from cryptography.hazmat.primitives.asymmetric.x25519 import X25519PrivateKey, X25519PublicKey
from cryptography.hazmat.primitives.ciphers.aead import ChaCha20Poly1305
from cryptography.hazmat.primitives.kdf.hkdf import HKDF

from .canonical import DIGEST_SIZE, Entropy, digest, system_entropy
from .errors import DecryptionFailure, InvalidKey
from .keys import KEY_SIZE, agreement_public_from_bytes, new_agreement_key, public_bytes
from .registry import SaltedCommitmentAnchor, SealedAnchor

SALT_SIZE = 32
SEAL_NONCE_SIZE = 12
_SEAL_INFO = b"immunipass sealed anchor v1"


@dataclass(frozen=True)
class SaltedCommitment:
    commitment: bytes
    salt: bytes  # off-chain; never part of the anchor

    def anchor(self) -> SaltedCommitmentAnchor:
        return SaltedCommitmentAnchor(self.commitment)


def commitment_value(salt: bytes, preimage: bytes) -> bytes:
    return digest(salt, preimage)


def commit(preimage: bytes, entropy: Entropy = system_entropy) -> SaltedCommitment:
    if not preimage:
        raise ValueError("cannot commit to an empty preimage")
    salt = entropy(SALT_SIZE)
    return SaltedCommitment(commitment_value(salt, preimage), salt)


def verify_commitment(commitment: bytes, salt: bytes, preimage: bytes) -> bool:
    return hmac.compare_digest(commitment, commitment_value(salt, preimage))


def _seal_key(shared: bytes, ephemeral_pub: bytes, holder_pub: bytes) -> bytes:
    return HKDF(
        algorithm=hashes.SHA256(), length=32, salt=None, info=_SEAL_INFO + ephemeral_pub + holder_pub
    ).derive(shared)


def seal(value: bytes, holder_public_key: bytes | X25519PublicKey, entropy: Entropy = system_entropy) -> SealedAnchor:
    """Encrypt a 32-octet digest to the holder under a fresh ephemeral X25519 key."""
    if len(value) != DIGEST_SIZE:
        raise ValueError("sealed value must be a 32-octet digest")
    if isinstance(holder_public_key, (bytes, bytearray)):
        holder_public_key = agreement_public_from_bytes(holder_public_key)
    holder_pub = public_bytes(holder_public_key)
    ephemeral = new_agreement_key(entropy)
    ephemeral_pub = public_bytes(ephemeral)
    try:
        shared = ephemeral.exchange(holder_public_key)
    except ValueError as exc:
        raise InvalidKey(str(exc)) from None
    nonce = entropy(SEAL_NONCE_SIZE)
    ciphertext = ChaCha20Poly1305(_seal_key(shared, ephemeral_pub, holder_pub)).encrypt(nonce, value, ephemeral_pub)
    return SealedAnchor(ephemeral_pub, nonce, ciphertext)


def open_sealed(anchor: SealedAnchor, holder_secret: X25519PrivateKey | bytes) -> bytes:
    if isinstance(holder_secret, (bytes, bytearray)):
        if len(holder_secret) != KEY_SIZE:
            raise DecryptionFailure("holder secret must be 32 octets")
        holder_secret = X25519PrivateKey.from_private_bytes(bytes(holder_secret))
    try:
        shared = holder_secret.exchange(agreement_public_from_bytes(anchor.ephemeral_public_key))
        key = _seal_key(shared, anchor.ephemeral_public_key, public_bytes(holder_secret))
        return ChaCha20Poly1305(key).decrypt(anchor.nonce, anchor.ciphertext, anchor.ephemeral_public_key)
    except (InvalidTag, ValueError, InvalidKey) as exc:
        raise DecryptionFailure(f"sealed anchor does not open: {type(exc).__name__}") from None
