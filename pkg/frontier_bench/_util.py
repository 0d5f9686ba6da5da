import hashlib
import os
import tempfile
from pathlib import Path


def digest64(data: bytes) -> int:
    # BLAKE2b with an 8 byte digest: stable across platforms and Python versions.
    return int.from_bytes(hashlib.blake2b(data, digest_size=8).digest(), "big")


def digest64_hex(data: bytes) -> str:
    return f"{digest64(data):016x}"


def atomic_write(path: str | os.PathLike, data: bytes) -> Path:
    """Write `data` to `path` through a temporary sibling file, so readers never see a partial file."""
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp_name = tempfile.mkstemp(prefix=f".{target.name}.", suffix=".tmp", dir=target.parent)
    try:
        with os.fdopen(fd, "wb") as tmp:
            tmp.write(data)
        os.replace(tmp_name, target)
    except BaseException:
        Path(tmp_name).unlink(missing_ok=True)
        raise
    return target


def ceil_div(numerator: int, denominator: int) -> int:
    return -(-numerator // denominator)


def split_records(data: bytes) -> list[bytes]:
    """Split a JSON-lines payload on LF only, as U+0085 and U+2028 may appear raw inside JSON strings."""
    lines = data.split(b"\n")
    if lines[-1] == b"":
        lines.pop()
    return lines
