"""Exception types used across the package.

Every error carries structured attributes so callers (including the CLI)
can inspect what went wrong without parsing messages.
"""

from __future__ import annotations


class NsanetError(Exception):
    """Base class for all package errors."""


class DimensionMismatchError(NsanetError, ValueError):
    """A tensor dimension did not match what the operation expected."""

    def __init__(self, what: str, expected, actual):
        self.what = what
        self.expected = expected
        self.actual = actual
        super().__init__(f"{what}: expected {expected}, got {actual}")


class NonFiniteLossError(NsanetError, FloatingPointError):
    """Training produced a non-finite loss or gradient."""

    def __init__(self, batch: int | None = None, epoch: int | None = None):
        self.batch = batch
        self.epoch = epoch
        where = []
        if epoch is not None:
            where.append(f"epoch {epoch}")
        if batch is not None:
            where.append(f"batch {batch}")
        at = " at " + ", ".join(where) if where else ""
        super().__init__(f"non-finite loss{at}")

    def with_epoch(self, epoch: int) -> "NonFiniteLossError":
        return NonFiniteLossError(batch=self.batch, epoch=epoch)


class StaleAdamStateError(NsanetError, ValueError):
    """Optimizer state shapes no longer match the model (e.g. after pruning)."""

    def __init__(self, what: str, expected, actual):
        self.what = what
        self.expected = expected
        self.actual = actual
        super().__init__(
            f"optimizer state for {what} has shape {actual}, model needs "
            f"{expected}; reset the state after pruning"
        )


class UnknownFeatureError(NsanetError, ValueError):
    """A feature id passed to pruning/selection does not exist."""

    def __init__(self, ids, p: int):
        self.ids = list(ids)
        self.p = p
        super().__init__(f"unknown feature ids {self.ids} (model has {p} columns)")


class CsvFormatError(NsanetError, ValueError):
    """A CSV cell could not be parsed. Row/col are 1-based like spreadsheets."""

    def __init__(self, path, row: int, col: int, value: str, reason: str):
        self.path = str(path)
        self.row = row
        self.col = col
        self.value = value
        self.reason = reason
        super().__init__(f"{path}: row {row}, column {col}: {reason} ({value!r})")


class MissingValuesError(NsanetError, ValueError):
    """The CSV contains empty cells; rows are 1-based, header excluded."""

    def __init__(self, path, rows):
        self.path = str(path)
        self.rows = list(rows)
        super().__init__(f"{path}: missing values in rows {self.rows}")


class SingleClassError(NsanetError, ValueError):
    """AUC (or a stratified operation) needs at least two classes."""

    def __init__(self, present):
        self.present = present
        super().__init__(f"need both classes present, got only {present}")
