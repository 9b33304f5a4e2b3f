"""Markup-to-markdown normalization that keeps tables, lists and headings.

Two source dialects are handled: a bounded wikitext subset (headings, lists,
``{| |}`` tables, bold/italic, internal and external links; templates are
dropped and flagged) and HTML fragments (tables, lists, headings, paragraphs).
Anything that cannot be parsed falls back to tag-stripped plain text.
"""

from __future__ import annotations

import re
from html.parser import HTMLParser

DIALECTS = ("wikitext", "html_table", "plain")


class StructureError(ValueError):
    pass


def normalize_structure(raw: str, dialect: str = "wikitext") -> str:
    return convert_structure(raw, dialect)[0]


def convert_structure(raw: str, dialect: str = "wikitext") -> tuple[str, list[str]]:
    """Return ``(markdown, flags)``. Flags name dropped or degraded constructs."""
    if dialect == "plain":
        return raw, []
    if dialect not in DIALECTS:
        raise ValueError(f"unknown dialect {dialect!r}")
    flags: list[str] = []
    try:
        if dialect == "wikitext":
            out = _wikitext_to_markdown(raw, flags)
        else:
            out = _html_to_markdown(raw, flags)
    except StructureError as exc:
        return strip_markup(raw), flags + [f"fallback:{exc}"]
    return out, flags


def strip_markup(raw: str) -> str:
    text = re.sub(r"<[^>]*>", "", raw)
    text = re.sub(r"\{\{|\}\}|\{\||\|\}|\|-|\|\+", " ", text)
    text = re.sub(r"\[\[(?:[^\]|]*\|)?([^\]]*)\]\]", r"\1", text)
    text = re.sub(r"'{2,}", "", text)
    return text


# ---------------------------------------------------------------------------
# wikitext

_HEADING = re.compile(r"^(={1,6})\s*(.*?)\s*\1\s*$")
_LIST = re.compile(r"^([*#:;]+)\s*(.*)$")
_INTERNAL_LINK = re.compile(r"\[\[([^\[\]]*)\]\]")
_EXTERNAL_LINK = re.compile(r"\[((?:https?|ftp)://[^\s\]]+)(?:\s+([^\]]*))?\]")


def _drop_templates(raw: str, flags: list[str]) -> str:
    out = []
    depth = 0
    i = 0
    dropped = 0
    while i < len(raw):
        if raw.startswith("{{", i):
            depth += 1
            i += 2
            continue
        if depth and raw.startswith("}}", i):
            depth -= 1
            i += 2
            if depth == 0:
                dropped += 1
            continue
        if not depth:
            out.append(raw[i])
        i += 1
    if depth:
        raise StructureError("unclosed template")
    if dropped:
        flags.extend(["template_dropped"] * dropped)
    return "".join(out)


def _inline(text: str) -> str:
    def internal(m: re.Match[str]) -> str:
        return m.group(1).split("|")[-1]

    def external(m: re.Match[str]) -> str:
        return m.group(2) if m.group(2) else m.group(1)

    text = _INTERNAL_LINK.sub(internal, text)
    text = _EXTERNAL_LINK.sub(external, text)
    text = text.replace("'''''", "***").replace("'''", "**").replace("''", "*")
    return text


def _split_outside_links(text: str, sep: str) -> list[str]:
    parts, buf, depth, i = [], [], 0, 0
    while i < len(text):
        if text.startswith("[[", i):
            depth += 1
            buf.append("[[")
            i += 2
        elif depth and text.startswith("]]", i):
            depth -= 1
            buf.append("]]")
            i += 2
        elif not depth and text.startswith(sep, i):
            parts.append("".join(buf))
            buf = []
            i += len(sep)
        else:
            buf.append(text[i])
            i += 1
    parts.append("".join(buf))
    return parts


def _cell_content(cell: str) -> str:
    # "attr=value | content": the attribute part is markup, not text
    pieces = _split_outside_links(cell, "|")
    if len(pieces) > 1 and "=" in pieces[0]:
        cell = "|".join(pieces[1:])
    return cell.strip()


class _WikiTable:
    def __init__(self) -> None:
        self.caption: str | None = None
        self.rows: list[list[tuple[str, bool]]] = []
        self._current: list[tuple[str, bool]] | None = None

    def new_row(self) -> None:
        self._current = None

    def add_cells(self, cells: list[str], header: bool) -> None:
        if self._current is None:
            self._current = []
            self.rows.append(self._current)
        self._current.extend((_cell_content(c), header) for c in cells)

    def continue_cell(self, line: str) -> None:
        if self._current:
            text, header = self._current[-1]
            self._current[-1] = ((text + " " + line.strip()).strip(), header)
        elif self.caption is not None:
            self.caption = (self.caption + " " + line.strip()).strip()
        elif line.strip():
            raise StructureError("text outside table cells")

    def render(self) -> list[str]:
        rows = [r for r in self.rows if r]
        lines = []
        if self.caption:
            lines.append(_inline(self.caption))
            lines.append("")
        if not rows:
            return lines
        return lines + markdown_table([[_inline(text) for text, _ in row] for row in rows])


def markdown_table(rows: list[list[str]]) -> list[str]:
    """Pipe table; the first row becomes the header. Ragged rows are padded."""
    width = max(len(r) for r in rows)

    def fmt(cells: list[str]) -> str:
        cells = [c.replace("\n", " ").replace("|", "\\|").strip() for c in cells]
        cells += [""] * (width - len(cells))
        return "| " + " | ".join(cells) + " |"

    return [fmt(rows[0]), "| " + " | ".join(["---"] * width) + " |"] + [fmt(r) for r in rows[1:]]


def _wikitext_to_markdown(raw: str, flags: list[str]) -> str:
    text = _drop_templates(raw, flags)
    out: list[str] = []
    table: _WikiTable | None = None
    for line in text.split("\n"):
        stripped = line.strip()
        if table is not None:
            if stripped.startswith("{|"):
                raise StructureError("nested table")
            if stripped.startswith("|}"):
                if out and out[-1] != "":
                    out.append("")
                out.extend(table.render())
                table = None
                rest = stripped[2:].strip()
                if rest:
                    out.append(_inline(rest))
            elif stripped.startswith("|+"):
                table.caption = stripped[2:].strip()
            elif stripped.startswith("|-"):
                table.new_row()
            elif stripped.startswith("!"):
                body = stripped[1:]
                cells = [c for part in _split_outside_links(body, "!!") for c in _split_outside_links(part, "||")]
                table.add_cells(cells, header=True)
            elif stripped.startswith("|"):
                table.add_cells(_split_outside_links(stripped[1:], "||"), header=False)
            else:
                table.continue_cell(line)
            continue
        if stripped.startswith("{|"):
            table = _WikiTable()
            continue
        m = _HEADING.match(stripped)
        if m:
            out.append("#" * len(m.group(1)) + " " + _inline(m.group(2)))
            continue
        m = _LIST.match(line)
        if m:
            depth = len(m.group(1))
            out.append("  " * (depth - 1) + "- " + _inline(m.group(2)))
            continue
        if re.fullmatch(r"-{4,}", stripped):
            out.append("---")
            continue
        out.append(_inline(line))
    if table is not None:
        raise StructureError("unclosed table")
    return "\n".join(out)


# ---------------------------------------------------------------------------
# html


class _HtmlToMarkdown(HTMLParser):
    _BLOCK = {"p", "div", "section", "article", "blockquote", "pre", "br", "hr", "dl", "dt", "dd"}
    _HIDDEN = {"script", "style", "head", "title"}

    def __init__(self) -> None:
        super().__init__(convert_charrefs=True)
        self.lines: list[str] = []
        self.buf: list[str] = []
        self.list_depth = 0
        self.heading: int | None = None
        self.in_li = False
        self.hidden = 0
        self.tables: list[dict] = []
        self.open_tags: list[str] = []

    # text sinks -----------------------------------------------------------
    def _flush(self) -> None:
        text = re.sub(r"\s+", " ", "".join(self.buf)).strip()
        self.buf = []
        if not text:
            return
        if self.heading:
            self.lines.append("#" * self.heading + " " + text)
        elif self.in_li:
            self.lines.append("  " * max(self.list_depth - 1, 0) + "- " + text)
        else:
            self.lines.append(text)

    def handle_starttag(self, tag: str, attrs: list) -> None:
        if tag in self._HIDDEN:
            self.hidden += 1
            return
        self.open_tags.append(tag)
        if self.tables:
            t = self.tables[-1]
            if tag == "table":
                raise StructureError("nested table")
            if tag == "tr":
                t["rows"].append([])
            elif tag in ("td", "th"):
                if not t["rows"]:
                    t["rows"].append([])
                t["rows"][-1].append([])
                t["cell"] = True
            elif tag == "caption":
                t["in_caption"] = True
            elif tag == "br":
                self._cell_text(" ")
            return
        if tag == "table":
            self._flush()
            self.tables.append({"rows": [], "caption": [], "cell": False, "in_caption": False})
        elif tag in ("ul", "ol"):
            self._flush()
            self.list_depth += 1
        elif tag == "li":
            self._flush()
            self.in_li = True
        elif re.fullmatch(r"h[1-6]", tag):
            self._flush()
            self.heading = int(tag[1])
        elif tag in self._BLOCK:
            self._flush()

    def handle_endtag(self, tag: str) -> None:
        if tag in self._HIDDEN:
            self.hidden = max(self.hidden - 1, 0)
            return
        if tag in self.open_tags:
            while self.open_tags and self.open_tags.pop() != tag:
                pass
        if self.tables:
            t = self.tables[-1]
            if tag in ("td", "th"):
                t["cell"] = False
            elif tag == "caption":
                t["in_caption"] = False
            elif tag == "table":
                self._emit_table(self.tables.pop())
            return
        if tag in ("ul", "ol"):
            self._flush()
            self.list_depth = max(self.list_depth - 1, 0)
            self.in_li = False
        elif tag == "li":
            self._flush()
            self.in_li = False
        elif re.fullmatch(r"h[1-6]", tag):
            self._flush()
            self.heading = None
        elif tag in self._BLOCK:
            self._flush()

    def _cell_text(self, data: str) -> None:
        t = self.tables[-1]
        if t["in_caption"]:
            t["caption"].append(data)
        elif t["rows"] and t["rows"][-1] and t["cell"]:
            t["rows"][-1][-1].append(data)
        elif data.strip():
            # stray text between cells; keep it in the last cell rather than lose it
            if not t["rows"]:
                t["rows"].append([])
            if not t["rows"][-1]:
                t["rows"][-1].append([])
            t["rows"][-1][-1].append(data)

    def handle_data(self, data: str) -> None:
        if self.hidden:
            return
        if self.tables:
            self._cell_text(data)
        else:
            self.buf.append(data)

    def _emit_table(self, t: dict) -> None:
        caption = re.sub(r"\s+", " ", "".join(t["caption"])).strip()
        rows = [[re.sub(r"\s+", " ", "".join(c)).strip() for c in r] for r in t["rows"] if r]
        if self.lines and self.lines[-1] != "":
            self.lines.append("")
        if caption:
            self.lines.extend([caption, ""])
        if rows:
            self.lines.extend(markdown_table(rows))
            self.lines.append("")

    def finish(self) -> str:
        self.close()
        if self.tables:
            raise StructureError("unclosed table")
        self._flush()
        while self.lines and self.lines[-1] == "":
            self.lines.pop()
        return "\n".join(self.lines)


def _html_to_markdown(raw: str, flags: list[str]) -> str:
    parser = _HtmlToMarkdown()
    parser.feed(raw)
    return parser.finish()
