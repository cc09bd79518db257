"""
Exception hierarchy for targetvet.

Parse and configuration errors abort the app they belong to. Backtracking
conditions (no constructor, no ending method, unresolved callee) are raised
internally, caught by the tracker, logged and counted.
"""

from typing import Optional


class TargetVetError(Exception):
    """Base class for every analyzer error."""


class MissingManifest(TargetVetError):
    def __init__(self, app_dir: str):
        super().__init__(f"no manifest.txt (or no .sbc files) in {app_dir}")
        self.app_dir = app_dir


class ParseError(TargetVetError):
    def __init__(self, file: str, line: int, reason: str):
        super().__init__(f"{file}:{line}: {reason}")
        self.file = file
        self.line = line
        self.reason = reason


class DuplicateClass(TargetVetError):
    def __init__(self, class_name: str, first: str, second: str):
        super().__init__(f"class {class_name} defined in both {first} and {second}")
        self.class_name = class_name


class DuplicateComponent(ParseError):
    pass


class CyclicHierarchy(TargetVetError):
    def __init__(self, cycle):
        super().__init__(f"cyclic class hierarchy: {' -> '.join(cycle)}")
        self.cycle = list(cycle)


class UnresolvedCallee(TargetVetError):
    def __init__(self, callee: str, reason: Optional[str] = None):
        super().__init__(f"no caller mechanism applies to {callee}" + (f" ({reason})" if reason else ""))
        self.callee = callee


class NoConstructorFound(TargetVetError):
    pass


class NoEndingMethod(TargetVetError):
    pass


class SpecArityMismatch(TargetVetError):
    def __init__(self, sink: str, index: int, arity: int):
        super().__init__(f"sink {sink}: tracked parameter {index} outside arity {arity}")
        self.sink = sink
        self.index = index
        self.arity = arity


class InfeasibleSpec(TargetVetError):
    pass


class ConfigError(TargetVetError):
    pass
