"""
Session Logger for analysis runs

One human-readable text file per batch run, stored in:
logs/runs/{run_id}/session.txt
It records the configuration, each app's outcome and the run end.
"""

from datetime import datetime
from pathlib import Path
from typing import Any, Dict, List, Optional


class SessionLogger:
    """
    Logs one batch run.

    Tracks:
    - Configuration in effect
    - Per-app outcomes (ok / failed / timed out) with verdict tallies
    - Run start/end
    """

    def __init__(self, log_root="logs", run_id: Optional[str] = None, command: str = "vet"):
        self.run_id = run_id or datetime.now().strftime("%Y-%m-%d_%H-%M-%S")
        self.command = command
        self.log_dir = Path(log_root) / "runs" / self.run_id
        self.log_dir.mkdir(parents=True, exist_ok=True)
        self.log_file = self.log_dir / "session.txt"
        self.app_count = 0
        self.failed_count = 0
        self.session_started = False

    def _write(self, text: str):
        with open(self.log_file, "a", encoding="utf-8") as f:
            f.write(text)

    def _timestamp(self) -> str:
        return datetime.now().strftime("%H:%M:%S")

    def start_session(self):
        if self.session_started:
            return
        self._write(f"""=====================================
RUN: {datetime.now().strftime("%Y-%m-%d %H:%M:%S")}
RUN ID: {self.run_id}
COMMAND: {self.command}
=====================================

""")
        self.session_started = True

    def log(self, message: str):
        self.start_session()
        self._write(f"[{self._timestamp()}] {message}\n")

    def log_config(self, config: Dict[str, Any]):
        """Log configuration in readable format."""
        self.start_session()
        self._write(f"\n[{self._timestamp()}] CONFIG LOADED\n")
        for section, values in config.items():
            if isinstance(values, dict):
                self._write(f"  {section}:\n")
                for key, val in values.items():
                    self._write(f"    - {key}: {val}\n")
            else:
                self._write(f"  {section}: {values}\n")
        self._write("\n")

    def log_app(self, app: str, status: str, verdicts: Dict[str, int], wall_ms: float, error: str = ""):
        self.start_session()
        self.app_count += 1
        if status != "ok":
            self.failed_count += 1
        tally = ", ".join(f"{k}={v}" for k, v in sorted(verdicts.items())) or "no sinks"
        self._write(f"[{self._timestamp()}] APP #{self.app_count}: {app}\n")
        self._write(f"  Status: {status.upper()}\n  Verdicts: {tally}\n  Wall: {wall_ms:.1f} ms\n")
        if error:
            self._write(f"  Error: {error}\n")
        self._write("\n")

    def end_session(self, reason: str = "Completed"):
        self.start_session()
        self._write(f"""
[{self._timestamp()}] RUN ENDED
  Reason: {reason}
  Apps: {self.app_count}
  Failed: {self.failed_count}
=====================================
""")

    def get_sessions(self) -> List[Dict[str, str]]:
        """All runs under the same log root, newest first."""
        runs_dir = self.log_dir.parent
        return [{"id": d.name, "path": str(d / "session.txt")}
                for d in sorted(runs_dir.iterdir(), reverse=True) if (d / "session.txt").exists()]

    def get_session_content(self, run_id: str) -> Optional[str]:
        path = self.log_dir.parent / run_id / "session.txt"
        return path.read_text(encoding="utf-8") if path.exists() else None
