"""Atomic file output."""

import os
import tempfile
from contextlib import contextmanager


@contextmanager
def atomic_writer(path, mode="w"):
    """Write to a temporary file in the target directory, then rename over ``path``.

    Readers never observe a partially written file; on error the target is left
    untouched.
    """
    path = os.fspath(path)
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=".tmp-", dir=directory)
    try:
        with os.fdopen(fd, mode, newline="" if "b" not in mode else None) as fh:
            yield fh
            fh.flush()
            os.fsync(fh.fileno())
        os.replace(tmp, path)
    except BaseException:
        try:
            os.unlink(tmp)
        except FileNotFoundError:
            pass
        raise
