"""Consent fabric: a consent-and-ownership engine for locker-to-locker data flows."""

from .audit import AuditEvent, AuditLog, canonical_json, state_digest
from .engine import COMMANDS, Engine
from .errors import EngineError
from .model import Agent, FieldMask, Locker, Resource
from .policy import (Action, ConnectionType, EcmaRule, Event, EventPattern,
                     Modality, Template, evaluate, parse_condition, parse_rule)
from .xnode import PostConditions, ProvenanceEntry, XNode

__version__ = "0.1.0"

__all__ = [
    "Action", "Agent", "AuditEvent", "AuditLog", "COMMANDS", "ConnectionType",
    "EcmaRule", "Engine", "EngineError", "Event", "EventPattern", "FieldMask",
    "Locker", "Modality", "PostConditions", "ProvenanceEntry", "Resource",
    "Template", "XNode", "canonical_json", "evaluate", "parse_condition",
    "parse_rule", "state_digest", "__version__",
]
