"""Figure specs: the same key=value format the experiment runner uses."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

KINDS = ("err_curve", "scaling_fit", "inequality_margin", "complexity_bars")


class SpecError(ValueError):
    """Bad figure spec or input artifacts that do not match the schema."""


@dataclass
class FigureSpec:
    kind: str
    out: str
    rows: str | None = None
    summary: str | None = None
    title: str = ""
    xlabel: str = ""
    ylabel: str = ""
    extras: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.kind not in KINDS:
            raise SpecError(f"unknown figure kind {self.kind!r}; expected one of {KINDS}")
        if not self.out:
            raise SpecError("spec needs an 'out' path")


_KEYS = {"kind", "out", "rows", "summary", "title", "xlabel", "ylabel"}


def parse_spec_lines(lines) -> FigureSpec:
    values: dict[str, str] = {}
    for lineno, raw in enumerate(lines, start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise SpecError(f"line {lineno}: expected key=value, got {raw.strip()!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in _KEYS:
            raise SpecError(f"line {lineno}: unknown key {key!r}")
        values[key] = value
    if "kind" not in values:
        raise SpecError("spec needs a 'kind'")
    if "out" not in values:
        raise SpecError("spec needs an 'out' path")
    return FigureSpec(
        kind=values["kind"],
        out=values["out"],
        rows=values.get("rows"),
        summary=values.get("summary"),
        title=values.get("title", ""),
        xlabel=values.get("xlabel", ""),
        ylabel=values.get("ylabel", ""),
    )


def parse_spec_file(path: str | Path) -> FigureSpec:
    with open(path, encoding="utf-8") as fh:
        return parse_spec_lines(fh)
