"""Error codes raised by the engine.

Every failure surfaces as an :class:`EngineError` subclass whose class name is
the stable error code recorded in audit events and matched by scenario
``expect error=<code>`` lines.  Messages carry engine-assigned identifiers
only, so they are deterministic across runs.
"""


class EngineError(Exception):
    """Base class for every engine-reported failure."""

    @property
    def code(self) -> str:
        return type(self).__name__

    def __str__(self) -> str:  # pragma: no cover - trivial
        detail = super().__str__()
        return detail if detail else self.code


# --- unknown identifiers -------------------------------------------------

class UnknownAgent(EngineError):
    pass


class UnknownLocker(EngineError):
    pass


class UnknownResource(EngineError):
    pass


class UnknownNode(EngineError):
    pass


class UnknownConnection(EngineError):
    pass


class UnknownEndpoint(EngineError):
    pass


class UnknownTemplate(EngineError):
    pass


class UnknownConnectionType(EngineError):
    pass


# --- registry / connection lifecycle ------------------------------------

class NotLockerOwner(EngineError):
    pass


class EndpointClosed(EngineError):
    pass


class SelfConnection(EngineError):
    pass


class CrossBorderUnsupported(EngineError):
    """Host and guest declared different jurisdictions; out of scope."""


class WrongState(EngineError):
    pass


class EvidenceMismatch(EngineError):
    pass


class NotLive(EngineError):
    pass


# --- exchange / node semantics -------------------------------------------

class KindMismatch(EngineError):
    pass


class Locked(EngineError):
    pass


class PostConditionDenied(EngineError):
    pass


class Forbidden(EngineError):
    pass


class Expired(EngineError):
    pass


class TunnelBroken(EngineError):
    pass


class Invalidated(TunnelBroken):
    """A hop is a tombstone left behind by a transfer.

    Subclass of TunnelBroken: an invalidated hop also breaks the tunnel, but
    scripts can match the more precise code.
    """


class AlreadyReverted(EngineError):
    pass


class NotPledged(EngineError):
    pass


class NotConferred(EngineError):
    pass


class ApprovalPending(EngineError):
    pass


class NotAuthorized(EngineError):
    pass


class ResourceDeleted(EngineError):
    pass


class ActiveDependents(EngineError):
    pass


# --- audit ----------------------------------------------------------------

class SequenceGap(EngineError):
    pass


class CorruptLog(EngineError):
    pass


# --- scenario runner ------------------------------------------------------

class InvalidArgument(EngineError):
    pass


class ParseError(EngineError):
    pass


class AssertionFailed(EngineError):
    pass


#: Every concrete code, for DSL validation and docs.
ALL_CODES = tuple(
    sorted(cls.__name__ for cls in list(globals().values())
           if isinstance(cls, type) and issubclass(cls, EngineError)
           and cls is not EngineError)
)
