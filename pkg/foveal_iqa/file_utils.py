"""Filesystem helpers shared by the pipeline stages."""

import os
import tempfile
from contextlib import contextmanager
from pathlib import Path
from typing import Iterator, Union

PathLike = Union[str, "os.PathLike[str]"]


@contextmanager
def atomic_output(path: PathLike, suffix: str = "") -> Iterator[Path]:
    """Yield a temporary path next to ``path``; rename it into place on success.

    The temporary file is removed if the body raises, so readers never see a
    partially written output.

    Args:
        path: Final destination
        suffix: Extension for the temporary file (some writers infer the
            format from it)
    """
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp_name = tempfile.mkstemp(
        prefix=f".{target.name}.", suffix=suffix or target.suffix, dir=target.parent
    )
    os.close(fd)
    tmp_path = Path(tmp_name)
    try:
        yield tmp_path
        os.replace(tmp_path, target)
    finally:
        if tmp_path.exists():
            tmp_path.unlink()


def write_text_atomic(path: PathLike, text: str) -> Path:
    """Write UTF-8 text through :func:`atomic_output`."""
    with atomic_output(path) as tmp:
        # newline="" keeps "\n" on every platform so outputs are byte-identical
        with open(tmp, "w", encoding="utf-8", newline="") as f:
            f.write(text)
    return Path(path)


def resolve_path(base: Path, value: PathLike) -> Path:
    """Resolve ``value`` relative to ``base`` unless it is absolute."""
    candidate = Path(value).expanduser()
    return candidate if candidate.is_absolute() else (base / candidate)
