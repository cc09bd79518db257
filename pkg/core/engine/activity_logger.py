"""
Activity Logger for the per-app analyzer

Writes each app's analysis trail to a plain-English file:
which sink sites were found, how callers were discovered and what the
detectors concluded.
"""

import logging
from datetime import datetime
from pathlib import Path
from typing import Iterable, Optional

logger = logging.getLogger("activity")

STATUS_NAMES = {
    "Vulnerable": "VULNERABLE",
    "Safe": "safe",
    "Unreachable": "unreachable from any entry",
    "Unknown": "unknown (value not a constant)",
    "LowConfidence": "low confidence (unsound path only)",
}

VIA_NAMES = {
    "Direct": "direct call",
    "ChildClassSig": "call through a child class",
    "AdvancedChain": "object handed to the framework",
    "Lifecycle": "lifecycle predecessor",
    "ICC": "inter-component intent",
    "ClinitImplicit": "class initialization",
}


class ActivityLogger:
    """
    Per-app activity log.

    Stored in: logs/runs/{run_id}/activity_{app}.log
    """

    def __init__(self, app: str, log_dir, session_logger=None):
        self.app = app
        self.session_logger = session_logger
        self.log_dir = Path(log_dir)
        self.log_dir.mkdir(parents=True, exist_ok=True)
        safe = app.replace(" ", "_").replace("/", "_")
        self.log_file = self.log_dir / f"activity_{safe}.log"

    def _write(self, entry: str):
        timestamp = datetime.now().strftime("%H:%M:%S")
        with open(self.log_file, "a", encoding="utf-8") as f:
            f.write(f"  {timestamp}  {entry}\n")
        logger.debug(f"[{self.app}] {entry}")

    def _write_header(self, text: str):
        border = "=" * 60
        self._write(border)
        self._write(f"  {text}")
        self._write(border)

    def _write_separator(self):
        self._write("-" * 40)

    # ========================
    # PIPELINE EVENTS
    # ========================

    def log_start(self, classes: int, methods: int):
        self._write_header(f"ANALYSIS STARTED  |  {self.app}  |  {classes} classes, {methods} methods")

    def log_sink_search(self, sink: str, hits: int):
        if hits:
            self._write(f"Found {hits} call site(s) of {sink}")
        else:
            self._write(f"No call sites of {sink}")

    def log_sink_site(self, site: str):
        self._write_separator()
        self._write(f"Analyzing sink site {site}")

    def log_cached(self, method: str, reachable: bool):
        state = "reachable" if reachable else "unreachable"
        self._write(f"Sink method {method} already analyzed ({state}); reusing result")

    def log_callers(self, method: str, vias: Iterable[str]):
        vias = list(vias)
        if not vias:
            self._write(f"No callers of {method}")
            return
        friendly = ", ".join(VIA_NAMES.get(v, v) for v in vias)
        self._write(f"Callers of {method} found by: {friendly}")

    def log_ssg(self, units: int, edges: int, tails: int, reachable: bool):
        self._write(f"Slice has {units} statements, {edges} edges, {tails} tail(s); "
                    f"{'reaches' if reachable else 'does not reach'} an entry point")

    def log_verdict(self, site: str, status: str, values: Optional[Iterable[str]] = None):
        friendly = STATUS_NAMES.get(status, status)
        shown = f"  |  values: {', '.join(values)}" if values else ""
        self._write(f"Verdict for {site}: {friendly}{shown}")

    def log_stop(self, sinks: int, wall_ms: float):
        self._write_header(f"ANALYSIS FINISHED  |  {sinks} sink site(s)  |  {wall_ms:.1f} ms")

    # ========================
    # ERRORS
    # ========================

    def log_error(self, message: str):
        self._write(f"ERROR: {message}")
        if self.session_logger:
            self.session_logger.log(f"[{self.app}] ERROR: {message}")
