"""Key loading and own-key initialisation over a store and rings.

The identity key is pinned on first sight and every later fetch is checked
against the pin; sub-keys additionally carry an identity-key signature, so
tampering with them is detectable even before first contact. Loading is
fetch-minimal: a sub-key already pinned as signature-verified costs a
single store round trip.
"""

from __future__ import annotations

from dataclasses import dataclass

from .authring import AuthMethod, AuthRecord, AuthRing, CompareResult
from .errors import (
    ComparisonFailedError,
    FingerprintMismatchError,
    InitError,
    KeyChangedWarningError,
    MissingKeyError,
    MissingRecordError,
    ParameterError,
    SignatureInvalidError,
)
from .keys import (
    ChatKeyPair,
    EntropySource,
    Fingerprint,
    IdentityKeyPair,
    KeyType,
    SharingKeyPair,
    SIGNATURE_OCTETS,
    check_keypair_consistency,
    fingerprint_ec,
    fingerprint_rsa,
    generate_chat_keypair,
    generate_identity_keypair,
    generate_sharing_keypair,
    sign_public_key,
    unframe_rsa_public,
    verify_key_signature,
)
from .store import (
    AttributeStore,
    KEY_ATTRIBUTE_FOR_TYPE,
    SIGNATURE_ATTRIBUTE_FOR_TYPE,
)

FINGERPRINT_HEX_CHARS = 40
GENERATE = "generate"
PUBLISH = "publish"

# fixed orders so repair reports are deterministic and exactly comparable
_PUBLIC_PUBLISH_ORDER = (
    (KeyType.IDENTITY_ED25519, "ed25519_pub"),
    (KeyType.CHAT_X25519, "x25519_pub"),
    (KeyType.SHARING_RSA, "rsa_pub"),
)
_SIGNATURE_PUBLISH_ORDER = (
    (KeyType.CHAT_X25519, "sig_x25519"),
    (KeyType.SHARING_RSA, "sig_rsa"),
)


@dataclass(frozen=True)
class LoadedKey:
    """Result of loading a contact's key: the octets as fetched, plus the
    ring state after the load."""

    key_type: KeyType
    public_octets: bytes
    method: AuthMethod
    freshly_tracked: bool


@dataclass
class OwnKeyMaterial:
    """A user's private key material; fields are None until generated."""

    identity: IdentityKeyPair | None = None
    chat: ChatKeyPair | None = None
    sharing: SharingKeyPair | None = None


@dataclass(frozen=True)
class RepairAction:
    """One step taken by initialisation: ``generate`` of a key type or
    ``publish`` of a store attribute."""

    action: str
    target: str

    def __str__(self) -> str:
        return f"{self.action} {self.target}"


class Session:
    """A user's view of the world: the store, one ring per key type, and
    (after initialisation) their own key material.

    Loading contacts never consults the own key material, so a session
    built from rings alone can fetch and verify other users' keys.
    """

    def __init__(
        self,
        store: AttributeStore,
        own_handle: str,
        rings: dict[KeyType, AuthRing] | None = None,
        own_keys: OwnKeyMaterial | None = None,
    ):
        if not isinstance(store, AttributeStore):
            raise ParameterError("store must be an AttributeStore")
        if not isinstance(own_handle, str) or not own_handle:
            raise ParameterError("own_handle must be a non-empty string")
        if rings is None:
            rings = {key_type: AuthRing(key_type) for key_type in KeyType}
        for key_type in KeyType:
            ring = rings.get(key_type)
            if ring is None or ring.key_type is not key_type:
                raise ParameterError(
                    f"session needs a ring for {key_type.label}"
                )
        self.store = store
        self.own_handle = own_handle
        self.rings = rings
        self.own_keys = own_keys

    def ring(self, key_type: KeyType) -> AuthRing:
        return self.rings[key_type]

    # -- loading contacts ------------------------------------------------

    def load_identity_key(self, handle: str) -> LoadedKey:
        """Fetch a contact's identity key and hold it against the pin.

        First sight pins the fingerprint with method SEEN; any later fetch
        that does not match the pin raises, leaving the ring unchanged.
        Exactly one store round trip.
        """
        public = self.store.fetch(handle, "ed25519_pub")
        if public is None:
            raise MissingKeyError(f"{handle!r} has no published identity key")
        fingerprint = fingerprint_ec(public)
        ring = self.rings[KeyType.IDENTITY_ED25519]
        result = ring.compare(handle, fingerprint)
        if result is CompareResult.MATCH:
            record = ring.get(handle)
            return LoadedKey(KeyType.IDENTITY_ED25519, public, record.method, False)
        if result is CompareResult.ABSENT:
            record = ring.track(handle, fingerprint, AuthMethod.SEEN)
            return LoadedKey(KeyType.IDENTITY_ED25519, public, record.method, True)
        raise FingerprintMismatchError(
            handle,
            tracked=ring.get(handle).fingerprint,
            observed=fingerprint,
            key_type=KeyType.IDENTITY_ED25519,
        )

    def load_signed_key(self, handle: str, key_type: KeyType) -> LoadedKey:
        """Fetch a contact's chat or sharing key, verifying its attestation.

        A key already pinned as signature-verified short-circuits after the
        single key fetch. Otherwise the signature is fetched; if absent the
        key is handled like an unattested key (pin on first sight, alarm on
        pin mismatch), supporting contacts whose clients never published
        signatures. If present, the signature is verified against the
        contact's identity key (loaded through its own pinning flow): an
        invalid signature always raises; a valid signature over a key that
        contradicts the pin raises a key-changed warning rather than
        silently replacing the pin.
        """
        if key_type not in SIGNATURE_ATTRIBUTE_FOR_TYPE:
            raise ParameterError("load_signed_key handles chat and sharing keys only")
        key_attribute = KEY_ATTRIBUTE_FOR_TYPE[key_type]
        public = self.store.fetch(handle, key_attribute)
        if public is None:
            raise MissingKeyError(f"{handle!r} has no published {key_type.label} key")
        fingerprint = _fingerprint_for(key_type, public)
        ring = self.rings[key_type]
        result = ring.compare(handle, fingerprint)
        existing = ring.get(handle)
        if (
            result is CompareResult.MATCH
            and existing.method >= AuthMethod.SIGNATURE_VERIFIED
        ):
            return LoadedKey(key_type, public, existing.method, False)

        signature = self.store.fetch(handle, SIGNATURE_ATTRIBUTE_FOR_TYPE[key_type])
        if signature is not None and len(signature) == SIGNATURE_OCTETS:
            identity = self.load_identity_key(handle)
            if not verify_key_signature(
                identity.public_octets, key_type, public, signature
            ):
                raise SignatureInvalidError(handle, key_type, fingerprint)
            if result is CompareResult.MISMATCH:
                raise KeyChangedWarningError(
                    handle,
                    key_type,
                    tracked=existing.fingerprint,
                    observed=fingerprint,
                )
            record = ring.track(handle, fingerprint, AuthMethod.SIGNATURE_VERIFIED)
            return LoadedKey(
                key_type, public, record.method, result is CompareResult.ABSENT
            )

        # no attestation published: fall back to pin-on-first-sight
        if result is CompareResult.MATCH:
            return LoadedKey(key_type, public, existing.method, False)
        if result is CompareResult.ABSENT:
            record = ring.track(handle, fingerprint, AuthMethod.SEEN)
            return LoadedKey(key_type, public, record.method, True)
        raise FingerprintMismatchError(
            handle,
            tracked=existing.fingerprint,
            observed=fingerprint,
            key_type=key_type,
        )

    # -- manual verification ----------------------------------------------

    def verify_contact_fingerprint(self, handle: str, asserted_hex: str) -> AuthRecord:
        """Compare an out-of-band identity fingerprint against the pin.

        The asserted hex is case-insensitive and may contain ASCII spaces
        (fingerprints are displayed in groups). On a match the record is
        upgraded to fingerprint-comparison, the strongest method; on a
        mismatch the ring is untouched and the caller must warn the user.
        """
        if not isinstance(asserted_hex, str):
            raise ParameterError("asserted fingerprint must be a string")
        normalized = asserted_hex.replace(" ", "").lower()
        if len(normalized) != FINGERPRINT_HEX_CHARS or any(
            ch not in "0123456789abcdef" for ch in normalized
        ):
            raise ParameterError(
                f"asserted fingerprint must be {FINGERPRINT_HEX_CHARS} hex characters"
            )
        ring = self.rings[KeyType.IDENTITY_ED25519]
        record = ring.get(handle)
        if record is None:
            raise MissingRecordError(
                f"no tracked identity key for {handle!r}; load it first"
            )
        if record.fingerprint.hex() != normalized:
            raise ComparisonFailedError(
                handle,
                tracked=record.fingerprint,
                observed=Fingerprint.from_hex(normalized),
                key_type=KeyType.IDENTITY_ED25519,
            )
        return ring.track(handle, record.fingerprint, AuthMethod.FINGERPRINT_COMPARISON)


def _fingerprint_for(key_type: KeyType, public_octets: bytes) -> Fingerprint:
    if key_type is KeyType.SHARING_RSA:
        return fingerprint_rsa(*unframe_rsa_public(public_octets))
    return fingerprint_ec(public_octets)


def init_own_keys(
    store: AttributeStore,
    own_handle: str,
    existing: OwnKeyMaterial | None = None,
    rings: dict[KeyType, AuthRing] | None = None,
    rng: EntropySource | None = None,
    force_identity: bool = False,
) -> tuple[Session, list[RepairAction]]:
    """Bring a user's key material and published attributes in line.

    Local private keys are the source of truth: missing pairs are
    generated, inconsistent sub-key pairs are regenerated, and the store
    is updated wherever it diverges (publics republished, signatures
    re-signed when absent or no longer verifying). Each step is reported
    in a fixed order, so a fully consistent state yields an empty report
    and rerunning is byte-idempotent.

    An inconsistent identity pair is the one case that is never repaired
    silently: regenerating it invalidates every published signature and
    every contact's pin, so it requires ``force_identity``.
    """
    material = existing if existing is not None else OwnKeyMaterial()
    report: list[RepairAction] = []

    identity = material.identity
    if identity is None:
        identity = generate_identity_keypair(rng)
        report.append(RepairAction(GENERATE, KeyType.IDENTITY_ED25519.label))
    elif not check_keypair_consistency(identity):
        if not force_identity:
            raise InitError(
                "identity keypair is inconsistent; regenerating it would orphan "
                "all published signatures and contacts' pins, pass "
                "force_identity to do it anyway"
            )
        identity = generate_identity_keypair(rng)
        report.append(RepairAction(GENERATE, KeyType.IDENTITY_ED25519.label))

    chat = material.chat
    if chat is None or not check_keypair_consistency(chat):
        chat = generate_chat_keypair(rng)
        report.append(RepairAction(GENERATE, KeyType.CHAT_X25519.label))

    sharing = material.sharing
    if sharing is None or not check_keypair_consistency(sharing):
        sharing = generate_sharing_keypair(rng)
        report.append(RepairAction(GENERATE, KeyType.SHARING_RSA.label))

    local_public = {
        "ed25519_pub": identity.public,
        "x25519_pub": chat.public,
        "rsa_pub": sharing.public_frame(),
    }
    for key_type, attribute in _PUBLIC_PUBLISH_ORDER:
        octets = local_public[attribute]
        if store.fetch(own_handle, attribute) != octets:
            store.publish(own_handle, attribute, octets)
            report.append(RepairAction(PUBLISH, attribute))

    signed_octets = {
        KeyType.CHAT_X25519: chat.public,
        KeyType.SHARING_RSA: sharing.public_frame(),
    }
    for key_type, attribute in _SIGNATURE_PUBLISH_ORDER:
        octets = signed_octets[key_type]
        current = store.fetch(own_handle, attribute)
        if current is None or not verify_key_signature(
            identity.public, key_type, octets, current
        ):
            signature = sign_public_key(identity, key_type, octets)
            store.publish(own_handle, attribute, signature.sig)
            report.append(RepairAction(PUBLISH, attribute))

    session = Session(
        store,
        own_handle,
        rings=rings,
        own_keys=OwnKeyMaterial(identity=identity, chat=chat, sharing=sharing),
    )
    return session, report
