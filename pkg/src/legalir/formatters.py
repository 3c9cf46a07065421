"""Output formatters for metrics reports and prediction files."""

from __future__ import annotations

import io
import json
import os
import tempfile
from abc import ABC, abstractmethod
from collections.abc import Iterable
from pathlib import Path
from typing import IO

from rich.console import Console
from rich.table import Table

from .exceptions import ArgumentError


def _encode(value: object) -> str:
    # sort_keys keeps every file byte-stable across runs
    return json.dumps(value, sort_keys=True, ensure_ascii=False)


def dumps_jsonl(records: Iterable[dict]) -> str:
    """Serialize records as JSON Lines with a trailing newline."""
    return "".join(f"{_encode(record)}\n" for record in records)


def write_atomic(path: Path, text: str) -> None:
    """Write ``text`` to ``path`` via a temp file in the same directory plus rename."""
    write_atomic_bytes(path, text.encode("utf-8"))


def write_atomic_bytes(path: Path, data: bytes) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp_name = tempfile.mkstemp(prefix=f".{path.name}.", suffix=".tmp", dir=path.parent)
    try:
        with os.fdopen(fd, "wb") as f:
            f.write(data)
        os.replace(tmp_name, path)
    except BaseException:
        Path(tmp_name).unlink(missing_ok=True)
        raise


def _cell(value: object) -> str:
    if isinstance(value, float):
        return f"{value:.4f}"
    if value is None:
        return "-"
    return str(value)


class Formatter(ABC):
    """Base class for output formatters."""

    @abstractmethod
    def format(self, data: list[dict]) -> str:
        """Format data as a string."""

    def format_stream(self, data: Iterable[dict], output: IO[str]) -> int:
        """Write formatted data to output. Returns count of records written."""
        items = list(data)
        output.write(self.format(items))
        return len(items)


class JSONFormatter(Formatter):
    """Format output as pretty-printed JSON with sorted keys (an array or one object)."""

    def __init__(self, indent: int = 2):
        self.indent = indent

    def format(self, data: list[dict] | dict) -> str:
        return json.dumps(data, indent=self.indent, sort_keys=True) + "\n"


class JSONLinesFormatter(Formatter):
    """Format output as JSON Lines (one JSON object per line)."""

    def format(self, data: list[dict]) -> str:
        return dumps_jsonl(data)

    def format_stream(self, data: Iterable[dict], output: IO[str]) -> int:
        count = 0
        for item in data:
            output.write(_encode(item))
            output.write("\n")
            count += 1
        return count


class MarkdownTableFormatter(Formatter):
    """Format output as a GitHub-flavoured Markdown table."""

    def __init__(self, fields: list[str] | None = None, title: str | None = None):
        self.fields = fields
        self.title = title

    def _get_fields(self, data: list[dict]) -> list[str]:
        if self.fields:
            return self.fields
        if not data:
            return []
        return list(data[0].keys())

    def format(self, data: list[dict]) -> str:
        lines: list[str] = []
        if self.title:
            lines += [f"## {self.title}", ""]
        fields = self._get_fields(data)
        if not fields:
            lines.append("_No results_")
            return "\n".join(lines) + "\n"
        lines.append("| " + " | ".join(fields) + " |")
        lines.append("|" + "|".join("---" for _ in fields) + "|")
        for row in data:
            lines.append("| " + " | ".join(_cell(row.get(f)) for f in fields) + " |")
        return "\n".join(lines) + "\n"


class TableFormatter(Formatter):
    """Format output as a rich table for terminal display."""

    MAX_ROWS = 100

    def __init__(self, fields: list[str] | None = None, title: str | None = None):
        self.fields = fields
        self.title = title

    def format(self, data: list[dict]) -> str:
        console = Console(file=io.StringIO(), force_terminal=True)
        self._write_table(data, console)
        return console.file.getvalue()

    def format_stream(self, data: Iterable[dict], output: IO[str]) -> int:
        items = list(data)
        isatty = getattr(output, "isatty", None)
        console = Console(file=output, force_terminal=bool(isatty and isatty()))
        self._write_table(items, console)
        return len(items)

    def _write_table(self, data: list[dict], console: Console) -> None:
        if not data:
            console.print("[dim]No results[/dim]")
            return

        fields = self.fields or list(data[0].keys())
        table = Table(title=self.title, show_header=True, header_style="bold cyan")
        for field in fields:
            table.add_column(field)
        for row in data[: self.MAX_ROWS]:
            table.add_row(*(_cell(row.get(f)) for f in fields))

        console.print(table)
        if len(data) > self.MAX_ROWS:
            console.print(f"[dim]... and {len(data) - self.MAX_ROWS} more rows[/dim]")


def get_formatter(format_name: str, **kwargs) -> Formatter:
    """Get a formatter by name."""
    formatters: dict[str, type[Formatter]] = {
        "json": JSONFormatter,
        "jsonl": JSONLinesFormatter,
        "md": MarkdownTableFormatter,
        "table": TableFormatter,
    }
    if format_name not in formatters:
        raise ArgumentError(
            f"Unknown format: {format_name}. Choose from: {list(formatters.keys())}"
        )
    return formatters[format_name](**kwargs)
