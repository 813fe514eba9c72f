"""Exception hierarchy shared by every layer of the package.

Each protocol-level exception carries an ``exit_code`` so the CLI can map a
failure to a distinct, documented process status without a lookup table
scattered across modules.
"""


class DynAuthError(Exception):
    exit_code = 1


# -- encoding / algebra ------------------------------------------------------

class EncodingError(DynAuthError, ValueError):
    """Operands of a masking XOR do not share an encoding length."""
    exit_code = 20


class DecodeError(DynAuthError, ValueError):
    exit_code = 21


class UnknownTag(DecodeError):
    exit_code = 22


class Truncated(DecodeError):
    exit_code = 23


class PointInvalid(DecodeError):
    """Octets do not encode a member of the source group."""
    exit_code = 24


class MaskCorrupt(DynAuthError, ValueError):
    """Unmasking produced octets that are not a valid point encoding.

    Almost always the consequence of a wrong unmasking key, i.e. a wrong
    identity/password guess, or of a tampered blob.
    """
    exit_code = 25


# -- protocol ----------------------------------------------------------------

class ProtocolError(DynAuthError):
    exit_code = 30
    stage = "protocol"


class StateError(ProtocolError):
    exit_code = 31
    stage = "state"


class DegeneratePoint(ProtocolError):
    exit_code = 32
    stage = "receive"


class AuthLocalFailed(ProtocolError):
    """The smart card rejected the entered identity/password."""
    exit_code = 10
    stage = "card_unlock"


class ServerAuthFailed(ProtocolError):
    exit_code = 11
    stage = "user_verify_and_respond"


class UserAuthFailed(ProtocolError):
    exit_code = 12
    stage = "server_verify_user"


class ReplayDetected(UserAuthFailed):
    exit_code = 13


class RcAuthFailed(ProtocolError):
    exit_code = 14
    stage = "password_change_user"


class VerificationFailed(ProtocolError):
    """Self-certified key material failed its public-key equation."""
    exit_code = 15
    stage = "server_register"


class DuplicateServer(ProtocolError):
    exit_code = 16
    stage = "server_register"


# -- baseline hash-only scheme -------------------------------------------------

class LocalCheckFailed(ProtocolError):
    exit_code = 40
    stage = "li_login"


class M1Invalid(ProtocolError):
    exit_code = 41
    stage = "li_server_verify"


class M3Invalid(ProtocolError):
    exit_code = 42
    stage = "li_user_verify"


class M5Invalid(ProtocolError):
    exit_code = 43
    stage = "li_confirm"


# -- adversary tooling ---------------------------------------------------------

class MissingKnowledge(DynAuthError):
    """An attack was started without a precondition it declares."""
    exit_code = 50


class NotInDictionary(DynAuthError):
    exit_code = 51


class ProbeUnexpectedlySucceeded(DynAuthError, AssertionError):
    exit_code = 52


class AttackFailed(DynAuthError):
    exit_code = 53


# -- simulator -----------------------------------------------------------------

class ScriptError(DynAuthError):
    exit_code = 60


class Deadlock(DynAuthError):
    exit_code = 61


class SecureLinkViolation(DynAuthError):
    exit_code = 62


class SelectorEmpty(DynAuthError):
    exit_code = 63


# -- persistence ---------------------------------------------------------------

class StoreCorrupt(DynAuthError):
    exit_code = 70


class DuplicateEntry(DynAuthError):
    exit_code = 71


class EntryMissing(DynAuthError):
    exit_code = 72
