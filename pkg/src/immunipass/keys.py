"""Thin helpers over the ``cryptography`` Ed25519 / X25519 primitives."""

from __future__ import annotations

from cryptography.exceptions import InvalidSignature
from cryptography.hazmat.primitives.asymmetric.ed25519 import Ed25519PrivateKey, Ed25519PublicKey
from cryptography.hazmat.primitives.asymmetric.x25519 import X25519PrivateKey, X25519PublicKey
from cryptography.hazmat.primitives.serialization import Encoding, NoEncryption, PrivateFormat, PublicFormat

from .canonical import Entropy, system_entropy
from .errors import InvalidKey

SIGNATURE_SIZE = 64
KEY_SIZE = 32


def new_signing_key(entropy: Entropy = system_entropy) -> Ed25519PrivateKey:
    return Ed25519PrivateKey.from_private_bytes(entropy(KEY_SIZE))


def signing_key_from_seed(seed: bytes) -> Ed25519PrivateKey:
    if len(seed) != KEY_SIZE:
        raise InvalidKey(f"Ed25519 seed must be {KEY_SIZE} octets")
    return Ed25519PrivateKey.from_private_bytes(seed)


def seed_bytes(key: Ed25519PrivateKey | X25519PrivateKey) -> bytes:
    return key.private_bytes(Encoding.Raw, PrivateFormat.Raw, NoEncryption())


def public_bytes(key: Ed25519PrivateKey | Ed25519PublicKey | X25519PrivateKey | X25519PublicKey) -> bytes:
    if isinstance(key, (Ed25519PrivateKey, X25519PrivateKey)):
        key = key.public_key()
    return key.public_bytes(Encoding.Raw, PublicFormat.Raw)


def load_public_key(raw: bytes) -> Ed25519PublicKey:
    if len(raw) != KEY_SIZE:
        raise InvalidKey(f"Ed25519 public key must be {KEY_SIZE} octets, got {len(raw)}")
    try:
        return Ed25519PublicKey.from_public_bytes(bytes(raw))
    except ValueError as exc:
        raise InvalidKey(str(exc)) from None


def verify_signature(public_key: bytes, signature: bytes, message: bytes) -> bool:
    if len(signature) != SIGNATURE_SIZE:
        return False
    try:
        load_public_key(public_key).verify(bytes(signature), bytes(message))
    except (InvalidSignature, InvalidKey):
        return False
    return True


def new_agreement_key(entropy: Entropy = system_entropy) -> X25519PrivateKey:
    return X25519PrivateKey.from_private_bytes(entropy(KEY_SIZE))


def agreement_key_from_bytes(raw: bytes) -> X25519PrivateKey:
    if len(raw) != KEY_SIZE:
        raise InvalidKey(f"X25519 private key must be {KEY_SIZE} octets")
    return X25519PrivateKey.from_private_bytes(bytes(raw))


def agreement_public_from_bytes(raw: bytes) -> X25519PublicKey:
    if len(raw) != KEY_SIZE:
        raise InvalidKey(f"X25519 public key must be {KEY_SIZE} octets")
    return X25519PublicKey.from_public_bytes(bytes(raw))
