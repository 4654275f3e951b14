import os
import tempfile
from datetime import datetime, timezone
from pathlib import Path
from typing import Union

import pandas as pd


def parse_timestamp(raw: Union[str, int, float]) -> int:
    """Epoch seconds (int or numeric string) or an ISO-8601 string -> integer seconds UTC."""
    if isinstance(raw, (int, float)):
        return int(raw)
    text = str(raw).strip()
    try:
        return int(float(text))
    except ValueError:
        pass
    stamp = pd.Timestamp(text)
    if stamp.tzinfo is None:
        stamp = stamp.tz_localize("UTC")
    return int(stamp.timestamp())


def get_datetime(seconds: int) -> datetime:
    return datetime.fromtimestamp(seconds, tz=timezone.utc)


def get_date_iso(seconds: int) -> str:
    return get_datetime(seconds).isoformat()


def atomic_write_bytes(path: Path, data: bytes) -> None:
    """Write to a temp file in the target directory, then rename over ``path``."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as file:
            file.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def atomic_write_text(path: Path, text: str) -> None:
    atomic_write_bytes(path, text.encode("utf-8"))


def write_key_values(path: Path, values: dict, header: str = "") -> None:
    lines = [f"# {header}"] if header else []
    lines += [f"{key} = {value}" for key, value in values.items()]
    atomic_write_text(path, "\n".join(lines) + "\n")


def read_key_values(path: Path) -> dict:
    values = {}
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        key, _, value = line.partition("=")
        values[key.strip()] = value.strip()
    return values
