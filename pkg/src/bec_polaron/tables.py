"""A minimal rectangular table for CSV output."""
from __future__ import annotations

from dataclasses import dataclass, field

from .errors import InputError


@dataclass
class Table:
    columns: tuple[str, ...]
    rows: list[tuple] = field(default_factory=list)
    flags: dict = field(default_factory=dict)

    def __post_init__(self):
        self.columns = tuple(self.columns)
        for row in self.rows:
            self._check(row)

    def _check(self, row):
        if len(row) != len(self.columns):
            raise InputError(f"row of length {len(row)} does not match columns {self.columns}")

    def append(self, row) -> None:
        row = tuple(row)
        self._check(row)
        self.rows.append(row)

    def column(self, name: str) -> list:
        i = self.columns.index(name)
        return [r[i] for r in self.rows]

    def __len__(self):
        return len(self.rows)
