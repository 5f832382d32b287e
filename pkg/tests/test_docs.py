import importlib.util
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent


def load_doclint():
    spec = importlib.util.spec_from_file_location("doclint", ROOT / "tools" / "doclint.py")
    mod = importlib.util.module_from_spec(spec)
    spec.loader.exec_module(mod)
    return mod


def test_docs_are_complete_and_clean():
    assert load_doclint().lint(ROOT) == []


def test_doclint_catches_gaps(tmp_path):
    doclint = load_doclint()
    (tmp_path / "docs").mkdir()
    (tmp_path / "docs" / "config.md").write_text("| `strategy` | x | y |\n")
    (tmp_path / "docs" / "procedures.md").write_text("- **Extra time**: `watter.domain.nope`\n")
    (tmp_path / "README.md").write_text("See " + "Eq" + ". 3 for details.\n")
    problems = doclint.lint(tmp_path)
    assert any("alpha is not documented" in p for p in problems)
    assert any("does not resolve" in p for p in problems)
    assert any("missing entry for 'Group expiry'" in p for p in problems)
    assert any("numbered reference" in p for p in problems)
