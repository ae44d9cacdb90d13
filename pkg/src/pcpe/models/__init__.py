from .datastream import DataStream, Locator, parse_locator
from .interface import BehaviorInterface, MethodSignature, Param
from .disseminator import Disseminator
from .policy_binding import GroupPolicy, InlinePolicy, PolicyBinding
from .digital_object import DigitalObject
from .principal import ANONYMOUS, Principal, Receipt
from .session import ScopeRecord, Session
from .mechanism import (
    Concat,
    DisseminationResult,
    Label,
    MechanismMethod,
    MechanismModule,
    PipelineStep,
    Select,
    SelectIndexed,
)

__all__ = [
    "ANONYMOUS",
    "BehaviorInterface",
    "Concat",
    "DataStream",
    "DigitalObject",
    "DisseminationResult",
    "Disseminator",
    "GroupPolicy",
    "InlinePolicy",
    "Label",
    "Locator",
    "MechanismMethod",
    "MechanismModule",
    "MethodSignature",
    "Param",
    "PipelineStep",
    "PolicyBinding",
    "Principal",
    "Receipt",
    "Select",
    "ScopeRecord",
    "SelectIndexed",
    "Session",
    "parse_locator",
]
