from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

from core.sbc.model import ComponentKind, MethodSig

INTENT_DESC = "Landroid/content/Intent;"


@dataclass(frozen=True)
class CallbackPair:
    """Registration API whose tainted argument (or receiver) is later called back via `handler`."""
    api_class: str
    api_method: str
    handler: str
    role: str = "arg"  # "arg" or "receiver"


DEFAULT_HANDLERS: Dict[ComponentKind, Tuple[str, ...]] = {
    ComponentKind.ACTIVITY: ("onCreate", "onStart", "onResume", "onPause", "onStop", "onRestart", "onDestroy"),
    ComponentKind.SERVICE: ("onCreate", "onStartCommand", "onBind", "onDestroy"),
    ComponentKind.RECEIVER: ("onReceive",),
    ComponentKind.PROVIDER: ("onCreate",),
}

# handler -> handlers that may run immediately before it
DEFAULT_PREDECESSORS: Dict[ComponentKind, Dict[str, Tuple[str, ...]]] = {
    ComponentKind.ACTIVITY: {
        "onStart": ("onCreate", "onRestart"),
        "onResume": ("onStart", "onPause"),
        "onRestart": ("onStop",),
    },
    ComponentKind.SERVICE: {
        "onStartCommand": ("onCreate",),
        "onBind": ("onCreate",),
    },
    ComponentKind.RECEIVER: {},
    ComponentKind.PROVIDER: {},
}

# handler parameter slot carrying the delivered Intent (slot 0 is `this`)
DEFAULT_INTENT_SLOTS: Dict[Tuple[ComponentKind, str], int] = {
    (ComponentKind.SERVICE, "onStartCommand"): 1,
    (ComponentKind.SERVICE, "onBind"): 1,
    (ComponentKind.RECEIVER, "onReceive"): 2,
}

DEFAULT_CALLBACK_PAIRS: Tuple[CallbackPair, ...] = (
    CallbackPair("java.lang.Thread", "start", "run", "receiver"),
    CallbackPair("java.util.concurrent.Executor", "execute", "run", "arg"),
    CallbackPair("android.os.AsyncTask", "execute", "doInBackground", "receiver"),
    CallbackPair("android.view.View", "setOnClickListener", "onClick", "arg"),
)

DEFAULT_ICC_APIS: Tuple[str, ...] = (
    "startActivity",
    "startActivityForResult",
    "startService",
    "bindService",
    "sendBroadcast",
)


@dataclass
class LifecycleTable:
    handler_names: Dict[ComponentKind, Tuple[str, ...]] = field(default_factory=lambda: dict(DEFAULT_HANDLERS))
    predecessor_map: Dict[ComponentKind, Dict[str, Tuple[str, ...]]] = field(
        default_factory=lambda: {k: dict(v) for k, v in DEFAULT_PREDECESSORS.items()})
    intent_slots: Dict[Tuple[ComponentKind, str], int] = field(default_factory=lambda: dict(DEFAULT_INTENT_SLOTS))
    callback_pairs: List[CallbackPair] = field(default_factory=lambda: list(DEFAULT_CALLBACK_PAIRS))
    icc_apis: Tuple[str, ...] = DEFAULT_ICC_APIS

    def __post_init__(self):
        for kind, preds in self.predecessor_map.items():
            self._check_acyclic(kind, preds)

    @staticmethod
    def _check_acyclic(kind: ComponentKind, preds: Dict[str, Tuple[str, ...]]):
        visiting, done = set(), set()

        def visit(h):
            if h in done:
                return
            if h in visiting:
                raise ValueError(f"cyclic lifecycle predecessors for {kind.value} at {h}")
            visiting.add(h)
            for p in preds.get(h, ()):
                visit(p)
            visiting.discard(h)
            done.add(h)

        for h in list(preds):
            visit(h)

    @classmethod
    def from_config(cls, extra_pairs: Iterable[dict] = (), extra_icc_apis: Sequence[str] = ()) -> "LifecycleTable":
        table = cls()
        for p in extra_pairs:
            pair = CallbackPair(p["api_class"], p["api_method"], p["handler"], p.get("role", "arg"))
            if pair not in table.callback_pairs:
                table.callback_pairs.append(pair)
        table.icc_apis = tuple(dict.fromkeys(tuple(table.icc_apis) + tuple(extra_icc_apis)))
        return table

    def handlers(self, kind: ComponentKind) -> Tuple[str, ...]:
        return self.handler_names.get(kind, ())

    def is_handler(self, kind: ComponentKind, name: str) -> bool:
        return name in self.handlers(kind)

    def predecessors(self, kind: ComponentKind, name: str) -> Tuple[str, ...]:
        return self.predecessor_map.get(kind, {}).get(name, ())

    def intent_slot(self, kind: ComponentKind, name: str) -> Optional[int]:
        return self.intent_slots.get((kind, name))

    def callback_handlers(self) -> set:
        return {p.handler for p in self.callback_pairs}

    def match_registration(self, api: MethodSig, role: str, handler: str) -> Optional[CallbackPair]:
        for pair in self.callback_pairs:
            if pair.api_method == api.name and pair.handler == handler and pair.role == role:
                return pair
        return None

    def is_icc_call(self, sig: MethodSig) -> bool:
        return sig.name in self.icc_apis and bool(sig.params) and sig.params[0] == INTENT_DESC


# component kind an ICC API launches; configured extras may reach any kind
ICC_TARGET_KINDS: Dict[str, ComponentKind] = {
    "startActivity": ComponentKind.ACTIVITY,
    "startActivityForResult": ComponentKind.ACTIVITY,
    "startService": ComponentKind.SERVICE,
    "bindService": ComponentKind.SERVICE,
    "sendBroadcast": ComponentKind.RECEIVER,
}

# framework base classes that make an app class a component of that kind
COMPONENT_BASES: Dict[str, ComponentKind] = {
    "android.app.Activity": ComponentKind.ACTIVITY,
    "android.app.Service": ComponentKind.SERVICE,
    "android.app.IntentService": ComponentKind.SERVICE,
    "android.content.BroadcastReceiver": ComponentKind.RECEIVER,
    "android.content.ContentProvider": ComponentKind.PROVIDER,
}


def icc_targets(api_name: str, kind: ComponentKind) -> bool:
    target = ICC_TARGET_KINDS.get(api_name)
    return target is None or target == kind
