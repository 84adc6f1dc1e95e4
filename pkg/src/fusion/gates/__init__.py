from .acoustic import AcousticGate
from .base import Assessment, BaseGate, get_gate
from .language_model import LanguageModelGate
from .lookahead import LookaheadGate
from .registry import POLICY_GATES

__all__ = [
    "Assessment",
    "BaseGate",
    "AcousticGate",
    "LanguageModelGate",
    "LookaheadGate",
    "POLICY_GATES",
    "get_gate",
]
