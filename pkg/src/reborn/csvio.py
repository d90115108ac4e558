"""RFC 4180 CSV reading and writing with byte-exact cell round-trips.

Writer quotes a cell only when it contains a comma, a double quote, or a
CR/LF, doubling embedded quotes; records end with CRLF. The parser accepts
both CRLF and bare LF record terminators and preserves cell content
verbatim, including newlines inside quoted cells.
"""

from .errors import DocumentError

_NEEDS_QUOTE = (",", '"', "\r", "\n")


def format_cell(cell: str) -> str:
    if any(ch in cell for ch in _NEEDS_QUOTE):
        return '"' + cell.replace('"', '""') + '"'
    return cell


def write_rows(rows: list[list[str]]) -> str:
    return "".join(",".join(format_cell(c) for c in row) + "\r\n" for row in rows)


def write_table(columns: list[str], rows: list[list[str]]) -> bytes:
    """Render a header row plus data rows as UTF-8 CSV bytes."""
    return write_rows([list(columns), *rows]).encode("utf-8")


def parse_rows(text: str) -> list[list[str]]:
    """Parse CSV text into rows of cells.

    Raises DocumentError(BAD_CSV) on an unterminated quoted cell or stray
    characters after a closing quote.
    """
    rows: list[list[str]] = []
    row: list[str] = []
    cell: list[str] = []
    i = 0
    n = len(text)
    in_quotes = False
    after_quotes = False  # just closed a quoted cell; expect , or record end

    def end_cell():
        row.append("".join(cell))
        cell.clear()

    def end_row():
        end_cell()
        rows.append(list(row))
        row.clear()

    while i < n:
        ch = text[i]
        if in_quotes:
            if ch == '"':
                if i + 1 < n and text[i + 1] == '"':
                    cell.append('"')
                    i += 2
                    continue
                in_quotes = False
                after_quotes = True
            else:
                cell.append(ch)
            i += 1
            continue
        if ch == '"' and not cell and not after_quotes:
            in_quotes = True
            i += 1
            continue
        if ch == ",":
            end_cell()
            after_quotes = False
            i += 1
            continue
        if ch == "\r" and i + 1 < n and text[i + 1] == "\n":
            end_row()
            after_quotes = False
            i += 2
            continue
        if ch == "\n":
            end_row()
            after_quotes = False
            i += 1
            continue
        if after_quotes:
            raise DocumentError("BAD_CSV", f"unexpected character {ch!r} after closing quote at offset {i}")
        cell.append(ch)
        i += 1

    if in_quotes:
        raise DocumentError("BAD_CSV", "unterminated quoted cell")
    if cell or row or after_quotes:
        end_row()
    return rows


def parse_table(data: bytes) -> tuple[list[str], list[list[str]]]:
    """Split CSV bytes into (header, data rows); every row must match the header width."""
    rows = parse_rows(data.decode("utf-8"))
    if not rows:
        raise DocumentError("BAD_CSV", "empty CSV document")
    header, body = rows[0], rows[1:]
    width = len(header)
    for k, r in enumerate(body):
        if len(r) != width:
            raise DocumentError("BAD_CSV", f"row {k + 1} has {len(r)} cells, header has {width}")
    return header, body
