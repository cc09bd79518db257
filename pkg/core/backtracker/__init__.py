from core.backtracker.edges import CallChain, CallerEdge, LoopKind, LoopLog, Via
from core.backtracker.lifecycle import CallbackPair, LifecycleTable
from core.backtracker.tracker import Backtracker, Reach

__all__ = [
    "Backtracker",
    "CallChain",
    "CallerEdge",
    "CallbackPair",
    "LifecycleTable",
    "LoopKind",
    "LoopLog",
    "Reach",
    "Via",
]
