"""Error taxonomy for the key-authentication library.

Every error class carries a stable ``code`` discriminant that the CLI and
machine-readable output rely on; the class hierarchy is part of the public
contract and new subclasses must not change existing codes.
"""

from __future__ import annotations


class KeyAuthError(Exception):
    """Base class for all library errors."""

    code = "error"


class ParameterError(KeyAuthError, ValueError):
    """An argument violates an operation's contract."""

    code = "parameter"


class MalformedKeyError(KeyAuthError, ValueError):
    """Key, signature, or fingerprint octets have an invalid shape."""

    code = "malformed-key"


class KeyGenerationError(KeyAuthError):
    """The entropy source failed while generating key material."""

    code = "key-generation"


class IllegalMethodError(KeyAuthError):
    """Authentication method not permitted for this ring's key type."""

    code = "illegal-method"


class FingerprintConflictError(KeyAuthError):
    """A tracked fingerprint differs from the one being recorded.

    The ring is left unchanged; resolution requires an explicit reset.
    """

    code = "fingerprint-conflict"

    def __init__(self, handle: str, tracked, offered):
        self.handle = handle
        self.tracked = tracked
        self.offered = offered
        super().__init__(
            f"fingerprint conflict for {handle!r}: tracked {tracked.hex()}, "
            f"offered {offered.hex()}"
        )


class RingParseError(KeyAuthError):
    """Base class for authring deserialisation failures."""

    code = "ring-parse"


class BadMagicError(RingParseError):
    code = "ring-bad-magic"


class BadVersionError(RingParseError):
    code = "ring-bad-version"


class TruncatedRingError(RingParseError):
    code = "ring-truncated"


class ChecksumMismatchError(RingParseError):
    code = "ring-checksum-mismatch"


class DuplicateHandleError(RingParseError):
    code = "ring-duplicate-handle"


class InvalidRingDataError(RingParseError):
    """Structurally valid but semantically bad ring content (non-canonical
    record order, unknown tags, illegal method nibble, trailing data)."""

    code = "ring-invalid-data"


class PublishError(KeyAuthError):
    """Attribute store rejected a publish (bad name or octet shape)."""

    code = "publish"


class StoreUnavailableError(KeyAuthError):
    """Attribute store backing file cannot be read or written."""

    code = "store-unavailable"


class MissingKeyError(KeyAuthError):
    """A required public key or attribute is absent from the store."""

    code = "missing-key"


class MissingRecordError(KeyAuthError):
    """No ring record exists for the contact."""

    code = "missing-record"


class FingerprintMismatchError(KeyAuthError):
    """A fetched key's fingerprint differs from the tracked one.

    Carries both fingerprints so the caller can display the alarm.
    """

    code = "fingerprint-mismatch"

    def __init__(self, handle: str, tracked, observed, key_type=None):
        self.handle = handle
        self.tracked = tracked
        self.observed = observed
        self.key_type = key_type
        label = f" ({key_type.label})" if key_type is not None else ""
        super().__init__(
            f"fingerprint mismatch for {handle!r}{label}: tracked "
            f"{tracked.hex()}, fetched key has {observed.hex()}"
        )


class ComparisonFailedError(FingerprintMismatchError):
    """A manually asserted fingerprint does not match the tracked one."""

    code = "comparison-failed"

    def __init__(self, handle: str, tracked, observed, key_type=None):
        super().__init__(handle, tracked, observed, key_type)
        self.args = (
            f"asserted fingerprint {observed.hex()} does not match the one "
            f"tracked for {handle!r} ({tracked.hex()})",
        )


class SignatureInvalidError(KeyAuthError):
    """A sub-key signature failed verification against the identity key."""

    code = "signature-invalid"

    def __init__(self, handle: str, key_type, fingerprint):
        self.handle = handle
        self.key_type = key_type
        self.fingerprint = fingerprint
        super().__init__(
            f"signature verification failed for {handle!r} {key_type.label} "
            f"key {fingerprint.hex()}"
        )


class KeyChangedWarningError(KeyAuthError):
    """A validly signed sub-key differs from the tracked fingerprint.

    The signature checks out, but silently replacing a pinned key would let
    a stolen identity key rotate sub-keys invisibly; the caller must reset
    the record explicitly to accept the new key.
    """

    code = "key-changed-warning"

    def __init__(self, handle: str, key_type, tracked, observed):
        self.handle = handle
        self.key_type = key_type
        self.tracked = tracked
        self.observed = observed
        super().__init__(
            f"{handle!r} {key_type.label} key changed from {tracked.hex()} "
            f"to {observed.hex()} (signature valid); reset the record to accept"
        )


class InitError(KeyAuthError):
    """Own-key initialisation cannot proceed."""

    code = "init"
