"""Utilities for performing I/O operations."""
import csv
import json
import os
import tempfile
from pathlib import Path
from typing import Any, Generator, Iterable, Sequence, Union

PathLike = Union[str, Path]


def stream_file(fp: PathLike, mode: str = 'rb',
                chunk_size: int = 1024**2, **kwargs: Any) \
        -> Generator[bytes, None, None]:
    """Stream the contents of a file.

    Args:
        fp: The file path as a string or Path object.
        mode: The file mode. The default is to read the file in binary
            (rb) mode. See the `open` builtin for more information.
        chunk_size: The size of the chunks to yield. Defaults to 1 MB.
        kwargs: Additional keyword arguments passed to the `open` builtin.

    Yields:
        Chunks of size `chunk_size` representing the contents of the file.
    """
    with open(fp, mode, **kwargs) as f:
        while True:
            chunk = f.read(chunk_size)
            if not chunk:
                break
            yield chunk


def atomic_write_bytes(fp: PathLike, data: bytes) -> None:
    """Write bytes to a file so that readers never see a partial file.

    The data is written to a temporary file in the same directory, which
    then replaces the target.
    """
    path = Path(fp)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f'.{path.name}.')
    try:
        with os.fdopen(fd, 'wb') as f:
            f.write(data)
        os.replace(tmp, path)
    except BaseException:
        Path(tmp).unlink(missing_ok=True)
        raise


def write_json(fp: PathLike, data: Any) -> None:
    """Atomically write `data` as indented, key-sorted JSON."""
    text = json.dumps(data, indent=2, sort_keys=True, allow_nan=False)
    atomic_write_bytes(fp, (text + '\n').encode('utf-8'))


def read_json(fp: PathLike) -> Any:
    """Read a JSON document."""
    with open(fp, 'r', encoding='utf-8') as f:
        return json.load(f)


def write_csv(fp: PathLike, header: Sequence[str],
              rows: Iterable[Sequence[Any]]) -> None:
    """Atomically write a CSV file with a header row.

    Floats are written with `repr`, so values round-trip exactly.
    """
    lines = [','.join(header)]
    for row in rows:
        lines.append(','.join(_format_cell(v) for v in row))
    atomic_write_bytes(fp, ('\n'.join(lines) + '\n').encode('utf-8'))


def read_csv(fp: PathLike) -> tuple[list[str], list[list[str]]]:
    """Read a CSV file, returning its header and its rows as strings."""
    with open(fp, 'r', encoding='utf-8', newline='') as f:
        reader = csv.reader(f)
        header = next(reader, [])
        rows = [row for row in reader if row]
    return header, rows


def _format_cell(value: Any) -> str:
    """Format a CSV cell, using the shortest exact representation of floats."""
    if isinstance(value, float):
        return repr(float(value))
    return str(value)
