"""Append-only journal: newline-delimited JSON records with sequence numbers.

The journal is the store's only persistence. Every record is self-contained,
so replaying any prefix yields a valid state. A final line that fails to
parse is treated as a torn trailing write and ignored with a warning; a bad
line (or sequence gap) anywhere else refuses the open, naming the offending
sequence number.
"""

import json
import logging
from pathlib import Path

from .errors import StoreError

logger = logging.getLogger(__name__)


class Journal:
    def __init__(self, path: str | Path):
        self.path = Path(path)
        self._fh = None
        self._next_seq = 1

    def replay(self) -> list[dict]:
        """Read all complete records; sets the next sequence number."""
        records: list[dict] = []
        if not self.path.exists():
            return records
        lines = self.path.read_bytes().split(b"\n")
        if lines and lines[-1] == b"":
            lines.pop()
        for k, raw in enumerate(lines):
            expected = k + 1
            try:
                rec = json.loads(raw.decode("utf-8"))
                if not isinstance(rec, dict) or rec.get("seq") != expected or "op" not in rec:
                    raise ValueError("bad record shape")
            except (ValueError, UnicodeDecodeError):
                if k == len(lines) - 1:
                    logger.warning("ignoring partial trailing journal record at seq %d", expected)
                    break
                raise StoreError("JOURNAL_CORRUPT", f"journal record at seq {expected} is corrupt")
            records.append(rec)
            self._next_seq = expected + 1
        return records

    def append(self, op: str, payload: dict) -> int:
        if self._fh is None:
            self.path.parent.mkdir(parents=True, exist_ok=True)
            self._fh = open(self.path, "ab")
        seq = self._next_seq
        line = json.dumps({"op": op, "payload": payload, "seq": seq}, ensure_ascii=False)
        self._fh.write(line.encode("utf-8") + b"\n")
        self._fh.flush()
        self._next_seq = seq + 1
        return seq

    def close(self) -> None:
        if self._fh is not None:
            self._fh.close()
            self._fh = None
