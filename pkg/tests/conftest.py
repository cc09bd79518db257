import textwrap
from pathlib import Path

import pytest

from core.config_manager import AnalyzerConfig
from core.detectors import load_sink_specs
from core.sbc.hierarchy import build_hierarchy
from core.sbc.parser import parse_app
from core.search_index import build_index

ROOT = Path(__file__).resolve().parent.parent
FIXTURES = ROOT / "fixtures"

CIPHER = "Ljavax/crypto/Cipher;.getInstance:(Ljava/lang/String;)Ljavax/crypto/Cipher;"


def write_app(root: Path, manifest: str, **files: str) -> Path:
    """Write an app directory: manifest.txt plus one `<name>.sbc` per keyword."""
    root.mkdir(parents=True, exist_ok=True)
    (root / "manifest.txt").write_text(textwrap.dedent(manifest).strip() + "\n", encoding="utf-8")
    for name, text in files.items():
        (root / f"{name}.sbc").write_text(textwrap.dedent(text).strip() + "\n", encoding="utf-8")
    return root


@pytest.fixture
def config():
    return AnalyzerConfig()


@pytest.fixture
def specs():
    return load_sink_specs(ROOT / "sinks.json")


@pytest.fixture
def fixture_app():
    """Parsed model, index and hierarchy of a checked-in fixture app."""
    def load(name: str):
        model = parse_app(FIXTURES / name / "app", AnalyzerConfig().framework_prefixes)
        return model, build_index(model), build_hierarchy(model)
    return load


@pytest.fixture
def app_dir(tmp_path):
    def make(manifest: str, **files: str) -> Path:
        return write_app(tmp_path / "app", manifest, **files)
    return make
