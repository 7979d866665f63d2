"""Exception hierarchy shared across the package."""


class UhsnError(Exception):
    """Base class for every error raised by this package."""


class FieldError(UhsnError, ValueError):
    """Invalid modulus, mismatched fields, or an out-of-range element."""


class DimensionError(UhsnError, ValueError):
    """Matrix or message dimensions do not conform."""


class ProtocolStateError(UhsnError):
    """A handshake message arrived in a state that cannot accept it."""


class AuthenticationError(UhsnError):
    """Tag verification failed (corruption or wrong key)."""


class NonceReuseError(UhsnError):
    """A nonce was presented twice under the same key."""


class CkgError(UhsnError):
    """The central key generator refused a request.

    ``code`` is one of ``unknown_sender``, ``unknown_receiver``,
    ``revoked_sender``, ``revoked_receiver``, ``unknown_node`` or
    ``stale_epoch``.
    """

    def __init__(self, code: str, message: str = ""):
        super().__init__(message or code)
        self.code = code


class FrameError(UhsnError, ValueError):
    """Bad CRC, missing fragment, or an oversized message."""


class ConfigError(UhsnError, ValueError):
    """Invalid scenario or CLI configuration; ``field`` names the culprit."""

    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}")
        self.field = field


class AttackSpaceTooLarge(UhsnError, ValueError):
    """Exhaustive enumeration requested over a space above the desk limit."""


class UnknownNodeError(UhsnError, KeyError):
    """A ledger or network operation named a node that was never added."""
