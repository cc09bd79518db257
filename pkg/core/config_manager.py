import json
import logging
import os
from typing import Any, Dict, List, Optional

from dotenv import load_dotenv
from pydantic import BaseModel, Field, ValidationError

from core.backtracker.lifecycle import DEFAULT_ICC_APIS, LifecycleTable
from core.errors import ConfigError

load_dotenv()

logger = logging.getLogger("config")

DEFAULT_FRAMEWORK_PREFIXES = ["java/", "javax/", "android/", "org/apache/http/"]


def get_default_analysis_config() -> Dict[str, Any]:
    """
    Default analyzer settings, one dict per section.

    - search: index cache toggle
    - backtracker: advanced-search depth and field-hop limits, extra pair/ICC table entries
    - forward_eval: ConstSet bound k, flow cap, contained-call depth
    - run: batch concurrency, per-app timeout, log dir, metrics db
    """
    return {
        "search": {
            "cache": True,
        },
        "backtracker": {
            "max_advanced_depth": 64,
            "max_field_hops": 1,
            "callback_pairs": [],        # extra {"api_class", "api_method", "handler", "role"}
            "icc_apis": [],              # extra ICC method names
        },
        "forward_eval": {
            "k": 8,
            "max_flows": 256,
            "max_contained_depth": 12,
        },
        "run": {
            "jobs": int(os.getenv("TARGETVET_JOBS", "4")),
            "timeout_s": float(os.getenv("TARGETVET_TIMEOUT_S")) if os.getenv("TARGETVET_TIMEOUT_S") else None,
            "log_dir": os.getenv("TARGETVET_LOG_DIR", "logs"),
            "db": os.getenv("TARGETVET_DB") or None,
        },
        "framework_prefixes": list(DEFAULT_FRAMEWORK_PREFIXES),
    }


# ============================================================
# Typed view
# ============================================================

class SearchSection(BaseModel):
    cache: bool = True


class PairEntry(BaseModel):
    api_class: str
    api_method: str
    handler: str
    role: str = "arg"


class BacktrackerSection(BaseModel):
    max_advanced_depth: int = Field(64, ge=1)
    max_field_hops: int = Field(1, ge=0)
    callback_pairs: List[PairEntry] = []
    icc_apis: List[str] = []


class ForwardEvalSection(BaseModel):
    k: int = Field(8, ge=1)
    max_flows: int = Field(256, ge=1)
    max_contained_depth: int = Field(12, ge=0)


class RunSection(BaseModel):
    jobs: int = Field(4, ge=1)
    timeout_s: Optional[float] = None
    log_dir: str = "logs"
    db: Optional[str] = None


class AnalyzerConfig(BaseModel):
    search: SearchSection = SearchSection()
    backtracker: BacktrackerSection = BacktrackerSection()
    forward_eval: ForwardEvalSection = ForwardEvalSection()
    run: RunSection = RunSection()
    framework_prefixes: List[str] = list(DEFAULT_FRAMEWORK_PREFIXES)

    def lifecycle(self) -> LifecycleTable:
        """Shipped lifecycle tables extended by the configured pairs and ICC APIs."""
        return LifecycleTable.from_config(
            [p.model_dump() for p in self.backtracker.callback_pairs],
            self.backtracker.icc_apis,
        )

    @property
    def icc_apis(self) -> List[str]:
        return list(dict.fromkeys(list(DEFAULT_ICC_APIS) + self.backtracker.icc_apis))


class ConfigManager:
    """
    Analyzer configuration manager

    Structure:
    {
        "search": {...},
        "backtracker": {...},
        "forward_eval": {...},
        "run": {...},
        "framework_prefixes": [...]
    }
    """

    def __init__(self, config_file: Optional[str] = None):
        self.config_file = config_file
        self.config: Dict[str, Any] = {}
        self.load_config()

    def load_config(self):
        if self.config_file and os.path.exists(self.config_file):
            try:
                with open(self.config_file, "r", encoding="utf-8") as f:
                    loaded = json.load(f)
                self.config = self._merge(self._get_defaults(), loaded)
            except (OSError, json.JSONDecodeError) as e:
                logger.error(f"Error loading config {self.config_file}: {e}; using defaults")
                self.config = self._get_defaults()
        else:
            if self.config_file:
                logger.info(f"Config file {self.config_file} not found; using defaults")
            self.config = self._get_defaults()

    @staticmethod
    def _merge(base: Dict[str, Any], override: Dict[str, Any]) -> Dict[str, Any]:
        out = dict(base)
        for key, value in override.items():
            if isinstance(value, dict) and isinstance(out.get(key), dict):
                out[key] = {**out[key], **value}
            else:
                out[key] = value
        return out

    def save_config(self):
        if not self.config_file:
            return
        try:
            with open(self.config_file, "w", encoding="utf-8") as f:
                json.dump(self.config, f, indent=4)
        except OSError as e:
            logger.error(f"Error saving config: {e}")

    def update_config(self, new_config: Dict[str, Any]) -> Dict[str, Any]:
        """
        Update config with new values.
        Numeric limits are clamped to their valid ranges.
        """
        self.config = self._merge(self.config, new_config)

        bt = self.config["backtracker"]
        bt["max_advanced_depth"] = max(1, int(bt.get("max_advanced_depth", 64)))
        bt["max_field_hops"] = max(0, int(bt.get("max_field_hops", 1)))

        fe = self.config["forward_eval"]
        fe["k"] = max(1, int(fe.get("k", 8)))
        fe["max_flows"] = max(1, int(fe.get("max_flows", 256)))
        fe["max_contained_depth"] = max(0, int(fe.get("max_contained_depth", 12)))

        run = self.config["run"]
        run["jobs"] = max(1, int(run.get("jobs", 4)))
        if run.get("timeout_s") is not None:
            run["timeout_s"] = max(0.001, float(run["timeout_s"]))

        self.save_config()
        return self.config

    def get_config(self) -> Dict[str, Any]:
        return self.config

    def get_section(self, name: str) -> Dict[str, Any]:
        return self.config.get(name, {})

    def get_framework_prefixes(self) -> List[str]:
        return list(self.config.get("framework_prefixes", DEFAULT_FRAMEWORK_PREFIXES))

    def analyzer_config(self) -> AnalyzerConfig:
        try:
            return AnalyzerConfig.model_validate(self.config)
        except ValidationError as e:
            raise ConfigError(f"invalid configuration in {self.config_file or '<defaults>'}: {e}") from e

    def _get_defaults(self) -> Dict[str, Any]:
        return get_default_analysis_config()


def load_analyzer_config(path: Optional[str] = None) -> AnalyzerConfig:
    return ConfigManager(path).analyzer_config()
