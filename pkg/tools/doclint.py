#!/usr/bin/env python3
"""Documentation checks: config coverage, the method map, and reference hygiene.

Usage: ``python3 tools/doclint.py [repo_root]``. Prints one line per problem
and exits non-zero when there are any.
"""
from __future__ import annotations

import dataclasses
import importlib
import re
import sys
from pathlib import Path

REQUIRED = [
    "Order pooling management", "Average extra time threshold grouping",
    "Distribution fitting and threshold optimisation", "Order arrival",
    "Order departure or group expiration", "Replace terminate", "Value function learning",
    "Extra time", "Minimal extra time objective", "Group expiry", "Threshold dispatch condition",
    "Dispatch probability", "Reduced threshold objective", "Value update", "Accumulated reward",
]

# citation-style pointers that should not leak into code or user docs
FORBIDDEN = [
    (re.compile(r"\bthe (spec|paper)\b", re.I), "refers to an outside document"),
    (re.compile(r"\b(Alg|Algorithm|Eq|Equation|Theorem|Lemma|Def)\.?\s*\d"), "numbered reference"),
    (re.compile(r"§|arXiv", re.I), "section or preprint pointer"),
    (re.compile("—"), "em-dash"),
]
ENTRY = re.compile(r"^- \*\*(.+?)\*\*: `([\w.]+)`\s*$")


def resolve(dotted: str):
    parts = dotted.split(".")
    for cut in range(len(parts), 0, -1):
        try:
            obj = importlib.import_module(".".join(parts[:cut]))
        except ImportError:
            continue
        for name in parts[cut:]:
            obj = getattr(obj, name)
        return obj
    raise ImportError(dotted)


def check_config(root: Path) -> list[str]:
    from watter.simharness import SimConfig
    from watter.valuelearn import TrainConfig

    text = (root / "docs" / "config.md").read_text()
    documented = set(re.findall(r"^\| `(\w+)` \|", text, re.M))
    problems = []
    for cls in (SimConfig, TrainConfig):
        for f in dataclasses.fields(cls):
            if f.name not in documented:
                problems.append(f"docs/config.md: {cls.__name__}.{f.name} is not documented")
    return problems


def check_map(root: Path) -> list[str]:
    problems, seen = [], set()
    for line in (root / "docs" / "procedures.md").read_text().splitlines():
        m = ENTRY.match(line)
        if not m:
            continue
        name, target = m.groups()
        seen.add(name)
        try:
            resolve(target)
        except (ImportError, AttributeError):
            problems.append(f"docs/procedures.md: {name} -> {target} does not resolve")
    problems += [f"docs/procedures.md: missing entry for {n!r}" for n in REQUIRED if n not in seen]
    return problems


def check_hygiene(root: Path) -> list[str]:
    files = [root / "README.md", *sorted((root / "docs").rglob("*.md")),
             *sorted((root / "src").rglob("*.py")), *sorted((root / "tests").rglob("*.py")),
             *sorted((root / "tools").rglob("*.py"))]
    problems = []
    for path in files:
        if not path.exists() or path.resolve() == Path(__file__).resolve():
            continue
        for i, line in enumerate(path.read_text().splitlines(), 1):
            for pat, why in FORBIDDEN:
                if pat.search(line):
                    problems.append(f"{path.relative_to(root)}:{i}: {why}: {line.strip()[:80]}")
    return problems


def lint(root) -> list[str]:
    root = Path(root)
    return check_config(root) + check_map(root) + check_hygiene(root)


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    root = Path(argv[0]) if argv else Path(__file__).resolve().parent.parent
    problems = lint(root)
    for p in problems:
        print(p)
    return 1 if problems else 0


if __name__ == "__main__":
    sys.exit(main())
