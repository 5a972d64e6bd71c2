"""Output writers. Every file is written to a temporary sibling and renamed into place."""

import csv
import io
import json
import logging
import os
import tempfile
from pathlib import Path
from typing import Any, Iterable, Sequence

logger = logging.getLogger(__name__)


def atomic_write_bytes(path, payload: bytes) -> Path:
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp_name = tempfile.mkstemp(prefix=f'.{target.name}.', dir=target.parent)
    try:
        with os.fdopen(fd, 'wb') as handle:
            handle.write(payload)
        os.replace(tmp_name, target)
    except BaseException:
        Path(tmp_name).unlink(missing_ok=True)
        raise
    logger.info('Wrote %s (%d bytes)', target, len(payload))
    return target


def csv_text(header: Sequence[str], rows: Iterable[Sequence[Any]]) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator='\n')
    writer.writerow(header)
    for row in rows:
        writer.writerow([format_cell(value) for value in row])
    return buffer.getvalue()


def format_cell(value: Any) -> str:
    if value is None:
        return ''
    if isinstance(value, bool):
        return 'true' if value else 'false'
    if isinstance(value, float):
        return repr(value)
    return str(value)


def json_text(payload: Any) -> str:
    return json.dumps(payload, indent=2, sort_keys=True) + '\n'


def write_csv(path, header: Sequence[str], rows: Iterable[Sequence[Any]]) -> Path:
    return atomic_write_bytes(path, csv_text(header, rows).encode('utf-8'))


def write_json(path, payload: Any) -> Path:
    return atomic_write_bytes(path, json_text(payload).encode('utf-8'))


def read_csv_rows(path) -> list:
    with open(path, newline='') as handle:
        return list(csv.DictReader(handle))
