"""HTML to node sequence.

The page is parsed into a light element tree, walked depth-first in
pre-order, and reduced to the nodes that carry text of their own plus whole
tables and lists. Each kept node records its visit order, which is the only
layout signal the model receives.
"""
from __future__ import annotations

import enum
import json
import unicodedata
from dataclasses import dataclass, field
from html.parser import HTMLParser
from typing import Iterable, Iterator, Sequence, Union

from .errors import EmptyDocument, InvalidEncoding

SKIP_TAGS = frozenset({"script", "style", "noscript", "template"})
TABLE_TAGS = frozenset({"table"})
LIST_TAGS = frozenset({"ol", "ul", "dl"})


class NodeKind(str, enum.Enum):
    TEXT = "Text"
    TABLE = "Table"
    LIST = "List"


@dataclass
class Element:
    tag: str
    children: list[Union["Element", str]] = field(default_factory=list)

    def iter_text(self) -> Iterator[str]:
        """All descendant text fragments in document order."""
        stack: list[Element | str] = [self]
        while stack:
            item = stack.pop()
            if isinstance(item, str):
                yield item
            else:
                stack.extend(reversed(item.children))


@dataclass
class DomTree:
    root: Element

    def text(self) -> str:
        return normalize_text(" ".join(self.root.iter_text()))


@dataclass(frozen=True)
class DomNode:
    node_id: int
    kind: NodeKind
    text: str
    tag: str
    depth: int

    def to_dict(self) -> dict:
        return {"node_id": self.node_id, "kind": self.kind.value, "tag": self.tag, "depth": self.depth, "text": self.text}


@dataclass(frozen=True)
class NodeSequence:
    doc_id: str
    chunk_index: int
    nodes: tuple[DomNode, ...]


def normalize_text(raw: str) -> str:
    """NFC-normalize and collapse every whitespace run (NBSP included) to one space."""
    return " ".join(unicodedata.normalize("NFC", raw).split())


VOID_TAGS = frozenset({
    "area", "base", "basefont", "bgsound", "br", "col", "command", "embed", "frame", "hr", "image", "img",
    "input", "keygen", "link", "meta", "param", "source", "track", "wbr",
})
# start tags that implicitly close an open <p>
P_CLOSERS = frozenset({
    "address", "article", "aside", "blockquote", "center", "details", "dialog", "dir", "div", "dl", "dd", "dt",
    "fieldset", "figcaption", "figure", "footer", "form", "h1", "h2", "h3", "h4", "h5", "h6", "header", "hgroup",
    "hr", "li", "listing", "main", "menu", "nav", "ol", "p", "pre", "section", "summary", "table", "ul",
})
HEADINGS = frozenset({"h1", "h2", "h3", "h4", "h5", "h6"})
# start tag -> (open tags it closes, tags that stop the search)
IMPLICIT_CLOSE = {
    "li": ({"li"}, {"ul", "ol", "menu", "table"}),
    "dt": ({"dt", "dd"}, {"dl", "table"}),
    "dd": ({"dt", "dd"}, {"dl", "table"}),
    "tr": ({"tr", "td", "th"}, {"table"}),
    "td": ({"td", "th"}, {"tr", "table"}),
    "th": ({"td", "th"}, {"tr", "table"}),
    "thead": ({"thead", "tbody", "tfoot", "tr", "td", "th"}, {"table"}),
    "tbody": ({"thead", "tbody", "tfoot", "tr", "td", "th"}, {"table"}),
    "tfoot": ({"thead", "tbody", "tfoot", "tr", "td", "th"}, {"table"}),
    "option": ({"option"}, {"select", "datalist"}),
    "optgroup": ({"option", "optgroup"}, {"select"}),
    "a": ({"a"}, {"table", "td", "th"}),
    "body": ({"head"}, set()),
}
TABLE_PARTS = frozenset({"table", "caption", "thead", "tbody", "tfoot", "tr", "td", "th"})
# an ordinary end tag never closes past a table or cell; table-structure end tags stop at the table
CELL_BARRIERS = frozenset({"table", "caption", "td", "th"})


class _TreeBuilder(HTMLParser):
    """Error-tolerant tree construction on top of the stdlib tokenizer.

    Never raises on malformed markup: unmatched end tags are ignored,
    unclosed elements end with the input, and the common implied end tags
    (``p``, ``li``, table rows and cells, ...) are applied.
    """

    def __init__(self):
        super().__init__(convert_charrefs=True)
        self.root = Element("html")
        self.stack: list[Element] = [self.root]
        self.skip_depth = 0
        self.n_elements = 0

    def _find(self, tags, barriers) -> int:
        for i in range(len(self.stack) - 1, 0, -1):
            tag = self.stack[i].tag
            if tag in tags:
                return i
            if tag in barriers:
                break
        return -1

    def _close_from(self, index: int):
        if index > 0:
            del self.stack[index:]

    def handle_starttag(self, tag, attrs):
        tag = tag.lower()
        self.n_elements += 1
        if self.skip_depth:
            self.skip_depth += tag in SKIP_TAGS
            return
        if tag in SKIP_TAGS:
            self.skip_depth = 1
            return
        if tag == "html":
            return  # the root already stands for it
        if tag in P_CLOSERS:
            self._close_from(self._find({"p"}, {"table", "td", "th", "button"}))
        if tag in HEADINGS and self.stack[-1].tag in HEADINGS:
            self.stack.pop()
        if tag in IMPLICIT_CLOSE:
            self._close_from(self._find(*IMPLICIT_CLOSE[tag]))
        el = Element(tag)
        self.stack[-1].children.append(el)
        if tag not in VOID_TAGS:
            self.stack.append(el)

    def handle_startendtag(self, tag, attrs):
        self.handle_starttag(tag, attrs)
        tag = tag.lower()
        if tag in SKIP_TAGS:
            self.skip_depth -= 1
        elif tag not in VOID_TAGS and not self.skip_depth and self.stack[-1].tag == tag:
            self.stack.pop()

    def handle_endtag(self, tag):
        tag = tag.lower()
        if self.skip_depth:
            self.skip_depth -= tag in SKIP_TAGS
            return
        if tag == "table":
            barriers = frozenset()
        elif tag in TABLE_PARTS:
            barriers = frozenset({"table"})
        else:
            barriers = CELL_BARRIERS
        self._close_from(self._find({tag}, barriers))

    def handle_data(self, data):
        if not self.skip_depth:
            self.stack[-1].children.append(data)


def parse_html(html: str | bytes) -> DomTree:
    """Parse (possibly malformed) HTML into an element tree.

    Comments and the contents of script, style, noscript and template
    elements are dropped. Bytes are decoded as UTF-8 with replacement.
    """
    if isinstance(html, bytes):
        text = html.decode("utf-8", errors="replace")
    elif isinstance(html, str):
        text = html
    else:
        raise TypeError(f"expected str or bytes, got {type(html).__name__}")
    if "\ufffd" in text and not text.replace("\ufffd", "").strip():
        raise InvalidEncoding("input holds no decodable UTF-8 content")
    builder = _TreeBuilder()
    builder.feed(text)
    builder.close()
    if builder.n_elements == 0 and not "".join(builder.root.iter_text()).strip():
        raise EmptyDocument("no elements or text in document")
    return DomTree(builder.root)


def walk_retained(tree: DomTree) -> Iterator[tuple[DomNode, bool]]:
    """Retained nodes in visit order, each with whether it sits inside an ``<a>``."""
    count = 0
    stack: list[tuple[Element, int, bool]] = [(tree.root, 0, False)]
    while stack:
        el, depth, in_link = stack.pop()
        in_link = in_link or el.tag == "a"
        if el.tag in TABLE_TAGS or el.tag in LIST_TAGS:
            kind = NodeKind.TABLE if el.tag in TABLE_TAGS else NodeKind.LIST
            yield DomNode(count, kind, normalize_text(" ".join(el.iter_text())), el.tag, depth), in_link
            count += 1
            continue
        own = normalize_text(" ".join(c for c in el.children if isinstance(c, str)))
        if own:
            yield DomNode(count, NodeKind.TEXT, own, el.tag, depth), in_link
            count += 1
        stack.extend((c, depth + 1, in_link) for c in reversed(el.children) if isinstance(c, Element))


def build_node_sequence(tree: DomTree) -> list[DomNode]:
    """Pre-order walk keeping text-owning elements and whole tables/lists.

    A table or list becomes one node holding all of its descendant text; its
    subtree (nested tables and lists included) is not visited further.
    """
    return [node for node, _ in walk_retained(tree)]


def html_to_nodes(html: str | bytes) -> list[DomNode]:
    return build_node_sequence(parse_html(html))


def chunk_sequence(nodes: Sequence[DomNode], max_nodes: int, doc_id: str = "") -> list[NodeSequence]:
    """Split into consecutive chunks of ``max_nodes`` (the last may be shorter)."""
    if max_nodes < 1:
        raise ValueError(f"max_nodes must be >= 1, got {max_nodes}")
    return [
        NodeSequence(doc_id, i, tuple(nodes[start : start + max_nodes]))
        for i, start in enumerate(range(0, len(nodes), max_nodes))
    ]


def nodes_to_jsonl(doc_id: str, nodes: Iterable[DomNode]) -> str:
    """Debug dump, one JSON object per node."""
    return "".join(json.dumps({"doc_id": doc_id, **n.to_dict()}, ensure_ascii=False) + "\n" for n in nodes)
