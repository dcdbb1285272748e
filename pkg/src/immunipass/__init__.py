"""Immunity-passport credential protocol simulator and attack harness."""

from .credential import (
    Attachment,
    CredentialBody,
    VerifiableCredential,
    VerifyProfile,
    canonicalize,
    parse,
    sign_credential,
    verify_credential,
)
from .did import Did, DidDocument, Resolver, did_key_from_public_key, parse_did, resolve
from .errors import Verdict
from .protocol import Profile
from .registry import RegistryChain, append_block, find_anchor, public_event_log, verify_chain
from .scenario import run_scenario

__version__ = "0.1.0"

__all__ = [
    "Attachment",
    "CredentialBody",
    "VerifiableCredential",
    "VerifyProfile",
    "canonicalize",
    "parse",
    "sign_credential",
    "verify_credential",
    "Did",
    "DidDocument",
    "Resolver",
    "did_key_from_public_key",
    "parse_did",
    "resolve",
    "Verdict",
    "Profile",
    "RegistryChain",
    "append_block",
    "find_anchor",
    "public_event_log",
    "verify_chain",
    "run_scenario",
]
