"""

This module writes reports to disk and reads their CSV tables back.


JSON reports are UTF-8 with sorted keys and no wall-clock entry, so equal
reports give byte-identical files. Each table becomes its own CSV file with a
header row, LF line endings and 17 significant digits.
"""

import json
import logging
import os

import pandas as pd

from hardyscope.errors import ReportIOError

logger = logging.getLogger(__name__)

FORMATS = ("json", "csv", "both")
FLOAT_FORMAT = "%.17g"


def _safe_name(name):
    return "".join(char if char.isalnum() or char in "-_." else "_" for char in name)


def report_json(report):
    """Canonical JSON text of a report."""
    text = json.dumps(report.to_dict(), sort_keys=True, ensure_ascii=False, indent=2)
    return text + "\n"


def write_table(table, path):
    """Write one table as CSV."""
    try:
        table.to_csv(path, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
    except OSError as error:
        raise ReportIOError(f"cannot write table {path}: {error}") from error
    return path


def emit(report, directory, format="json"):  # pylint: disable=redefined-builtin
    """

    Write a report to `directory`.


    Args:
        report (Report): The report.
        directory (str): Output folder, created when missing.
        format (str): "json", "csv" or "both".

    Returns:
        list: Paths of the written files, in write order.

    Raises:
        ReportIOError: If the folder or a file cannot be written.
    """
    if format not in FORMATS:
        raise ReportIOError(
            f"unknown report format '{format}', expected one of {FORMATS}"
        )
    try:
        os.makedirs(directory, exist_ok=True)
    except OSError as error:
        raise ReportIOError(
            f"cannot create output folder {directory}: {error}"
        ) from error

    stem = _safe_name(report.name)
    written = []
    if format in ("json", "both"):
        path = os.path.join(directory, f"{stem}.json")
        try:
            with open(path, "w", encoding="utf-8", newline="\n") as handle:
                handle.write(report_json(report))
        except OSError as error:
            raise ReportIOError(f"cannot write report {path}: {error}") from error
        written.append(path)
    if format in ("csv", "both"):
        for name, table in sorted(report.tables.items()):
            path = os.path.join(directory, f"{stem}.{_safe_name(name)}.csv")
            written.append(write_table(table, path))
    logger.info(
        "Wrote %d files for report %s to %s", len(written), report.name, directory
    )
    return written


def load_csv_table(path):
    """

    Read a CSV table written by emit().


    Raises:
        ReportIOError: If the file is missing or malformed.
    """
    try:
        return pd.read_csv(path, float_precision="round_trip")
    except (OSError, pd.errors.ParserError, pd.errors.EmptyDataError) as error:
        raise ReportIOError(f"cannot read table {path}: {error}") from error


def load_report(path):
    """Read a JSON report written by emit() as a dictionary."""
    try:
        with open(path, "r", encoding="utf-8") as handle:
            return json.load(handle)
    except (OSError, json.JSONDecodeError) as error:
        raise ReportIOError(f"cannot read report {path}: {error}") from error
