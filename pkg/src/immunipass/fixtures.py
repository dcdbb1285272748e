"""The example immunity card (Louis Pasteur, IgM negative, IgG positive) as reproducible fixtures.

The issuer ``did:web:vc.transmute.world`` is not resolvable here, so it gets
a stub DID document whose key is derived from a fixed seed. Ed25519 signing
is deterministic, so the signed golden credential is byte-stable and ships
as ``data/fixtures/golden.vc``.
"""

from __future__ import annotations

from datetime import date
from importlib import resources

from . import canonical
from .canonical import SeededEntropy, digest, utc
from .credential import REQUIRED_TYPES, CredentialBody, VerifiableCredential, sign_credential, signed_preimage
from .did import DidDocument, Resolver, VerificationMethod, parse_did
from .hardened import commit
from .keys import public_bytes, signing_key_from_seed
from .registry import PlainHash, SaltedCommitmentAnchor, anchor_from_document, anchor_to_document

GOLDEN_ISSUER = parse_did("did:web:vc.transmute.world")
GOLDEN_SUBJECT = parse_did("did:key:z6MkjRagNiMu91DduvCvgEsqLZDVzrJzFrwahc4tXLt9DoHd")
GOLDEN_ID = "http://example.com/credential/123"
GOLDEN_ISSUED = utc(2019, 12, 11, 3, 50, 55)
GOLDEN_EXPIRES = utc(2020, 12, 11, 3, 50, 55)
GOLDEN_PHOTO = digest(b"Louis Pasteur, identity photograph")

GOLDEN_IDENTITY = {
    "givenName": "Louis",
    "familyName": "Pasteur",
    "birthDate": date(1958, 7, 17),
    "image": GOLDEN_PHOTO,
}


def golden_issuer_key():
    return signing_key_from_seed(digest(b"immunipass golden issuer key"))


def golden_issuer_document() -> DidDocument:
    key_id = GOLDEN_ISSUER.url("key-1")
    return DidDocument(
        id=GOLDEN_ISSUER,
        verification_methods=(VerificationMethod(key_id, public_bytes(golden_issuer_key())),),
        authentication=(key_id,),
        updated_at=GOLDEN_ISSUED,
    )


def golden_body(igm: bool = False, igg: bool = True) -> CredentialBody:
    return CredentialBody(
        id=GOLDEN_ID,
        credential_types=REQUIRED_TYPES,
        issuer_did=GOLDEN_ISSUER,
        issuance_date=GOLDEN_ISSUED,
        expiration_date=GOLDEN_EXPIRES,
        subject_did=GOLDEN_SUBJECT,
        claims={**GOLDEN_IDENTITY, "IgM": igm, "IgG": igg},
    )


def golden_credential(**kwargs) -> VerifiableCredential:
    return sign_credential(golden_body(), golden_issuer_key(), **kwargs)


def golden_anchor_pair() -> tuple[PlainHash, SaltedCommitmentAnchor, bytes]:
    """Plain and salted anchors over the same golden credential, plus the salt."""
    preimage = signed_preimage(golden_credential())
    salted = commit(preimage, SeededEntropy(b"immunipass golden salt"))
    return PlainHash(digest(preimage)), salted.anchor(), salted.salt


def anchor_fixture_bytes(anchor) -> bytes:
    return canonical.encode(anchor_to_document(anchor)) + b"\n"


def load_anchor_fixture(name: str):
    return anchor_from_document(canonical.decode(read_fixture(name).rstrip(b"\n")))


def golden_resolver(registry=None) -> Resolver:
    return Resolver(registry, {GOLDEN_ISSUER: golden_issuer_document()})


def read_fixture(name: str) -> bytes:
    return resources.files("immunipass").joinpath("data", "fixtures", name).read_bytes()


def scenario_path(name: str):
    return resources.files("immunipass").joinpath("data", "scenarios", name)
