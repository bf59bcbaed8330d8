"""Synthetic labeled web pages.

Pages mix article content (title, headings, paragraphs, tables, lists) with
the usual template clutter: menus, breadcrumbs, cookie banners, share bars,
sidebars, newsletter boxes and footers. Clutter sometimes borrows content
tags (``<h3>``, ``<p>``) and headings are sometimes written as
``<p><strong>``, so tag names alone do not give the answer away.

Labels are attached to the node ids that :mod:`neuscrape.dom` assigns; every
page is re-parsed after generation and checked node by node.
"""
from __future__ import annotations

import html as htmlmod
import json
import os
import random
from dataclasses import dataclass, field
from typing import Iterable, Iterator

from .dom import html_to_nodes, normalize_text
from .model import LABELS

PRIMARY, HEADING, TITLE, PARAGRAPH, TABLE, LIST = range(6)

TOPIC_WORDS = {
    "science": "research scientists study data experiment laboratory results evidence climate ocean "
               "species energy molecule cells genome telescope planet particle physics chemistry biology "
               "samples theory model analysis measurement temperature carbon emissions reef fossil".split(),
    "business": "market company revenue profit investors shares growth quarter earnings strategy customers "
                "product launch supply chain prices inflation economy startup funding merger industry "
                "retail demand workers wages bank loans exports trade forecast".split(),
    "sports": "team season coach players match league championship goal score victory defeat injury "
              "training stadium fans tournament final record striker defense midfield transfer contract "
              "referee penalty playoff squad captain title race".split(),
    "travel": "city island beach mountain hotel flight journey village coast museum tour guide trail "
              "harbor market festival cuisine restaurant train route hiking sunset lake valley castle "
              "river bridge ferry cathedral café plaza".split(),
    "technology": "software developers chip processor network cloud security privacy data battery device "
                  "smartphone update release platform users app algorithm server encryption open source "
                  "hardware robot sensor display memory browser code".split(),
    "food": "recipe flour butter sugar oven bake minutes garlic onion tomato sauce pasta cheese salt "
            "pepper olive oil chicken vegetables soup bread dough spices lemon herbs roast dish flavor "
            "kitchen crispy".split(),
}
FUNCTION_WORDS = ("the of and to in a for on with that as by from at is was were has have "
                  "this their its which after more than about into over new").split()
FIRST_NAMES = "Anna Ben Carla David Elena Farid Grace Hiro Ines Jonas Kofi Lena Marco Nadia Omar Priya".split()
LAST_NAMES = "Alvarez Brooks Chen Dubois Eriksen Fischer Garcia Haddad Ito Jensen Kowalski Larsen Moreau".split()
MONTHS = "January February March April May June July August September October November December".split()
SITE_A = "Daily Global Metro Northern Green Urban Open Prime Coastal Blue Silver Evening".split()
SITE_B = "Times Herald Journal Post Review Digest Wire Report Insider Gazette Tribune Chronicle".split()
NAV_ITEMS = ["Home", "News", "World", "Business", "Technology", "Science", "Health", "Sports", "Culture",
             "Opinion", "Travel", "Food", "Contact", "About Us", "Subscribe", "Log in", "Search", "Podcasts",
             "Video", "Events", "Careers", "Newsletters"]
COOKIE_TEXTS = [
    "We use cookies to improve your experience on our site and to show you relevant advertising. "
    "By continuing to browse the site you are agreeing to our use of cookies.",
    "This website stores cookies on your computer. These cookies are used to collect information about "
    "how you interact with our website and allow us to remember you.",
    "We and our partners use cookies and similar technologies to personalise content and ads, to provide "
    "social media features and to analyse our traffic.",
]
COOKIE_BUTTONS = ["Accept all", "Accept", "Got it", "Manage preferences", "Reject non-essential"]
NEWSLETTER_HEADS = ["Subscribe to our newsletter", "Stay in the loop", "Never miss a story", "Get the briefing"]
NEWSLETTER_TEXTS = [
    "Get the latest headlines and exclusive stories delivered straight to your inbox every morning. "
    "No spam, unsubscribe at any time.",
    "Sign up for our free weekly email and receive the best of our reporting, handpicked by our editors, "
    "every Friday.",
    "Join thousands of readers who start their day with our newsletter. Enter your email address below to "
    "subscribe.",
]
LEGAL_TEXTS = [
    "The material on this site may not be reproduced, distributed, transmitted, cached or otherwise used, "
    "except with the prior written permission of {site}.",
    "Use of this site constitutes acceptance of our User Agreement, Privacy Policy and Cookie Statement.",
    "{site} may earn a portion of sales from products that are purchased through our site as part of our "
    "affiliate partnerships with retailers.",
]
FOOTER_LINKS = ["Privacy Policy", "Terms of Service", "Contact us", "Advertise", "Accessibility", "Sitemap",
                "Cookie settings", "Help"]
SIDEBAR_HEADS = ["Related Articles", "Most Popular", "Trending Now", "You May Also Like", "Recommended for you",
                 "Editor's Picks", "More from {site}"]
SHARE_ITEMS = ["Facebook", "Twitter", "LinkedIn", "Email", "Print", "WhatsApp", "Copy link"]
AD_TEXTS = ["Advertisement", "Sponsored Content", "Story continues below advertisement", "ADVERTISEMENT"]
COMMENT_TEXTS = ["Leave a comment", "You must be logged in to post a comment.", "Comments are closed.",
                 "Be the first to comment on this article"]


@dataclass(frozen=True)
class SyntheticSpec:
    n_pages: int = 100
    seed: int = 0
    primary_paragraph_range: tuple[int, int] = (3, 8)
    boilerplate_menu_range: tuple[int, int] = (1, 3)
    primary_fraction_range: tuple[float, float] = (0.2, 0.8)
    table_prob: float = 0.4
    list_prob: float = 0.5
    doc_prefix: str = "syn"
    topic_words: dict = field(default_factory=lambda: TOPIC_WORDS)
    function_words: tuple = tuple(FUNCTION_WORDS)

    def to_dict(self) -> dict:
        return {
            "n_pages": self.n_pages, "seed": self.seed,
            "primary_paragraph_range": list(self.primary_paragraph_range),
            "boilerplate_menu_range": list(self.boilerplate_menu_range),
            "primary_fraction_range": list(self.primary_fraction_range),
            "table_prob": self.table_prob, "list_prob": self.list_prob, "doc_prefix": self.doc_prefix,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SyntheticSpec":
        d = dict(d)
        for key in ("primary_paragraph_range", "boilerplate_menu_range", "primary_fraction_range"):
            if key in d:
                d[key] = tuple(d[key])
        if "function_words" in d:
            d["function_words"] = tuple(d["function_words"])
        return cls(**d)


@dataclass
class LabeledDocument:
    doc_id: str
    html: str
    node_labels: dict[int, tuple[bool, ...]]

    def labels_for(self, n_nodes: int) -> list[tuple[bool, ...]]:
        """Dense label list; unlabeled nodes are all-false."""
        empty = (False,) * len(LABELS)
        return [self.node_labels.get(i, empty) for i in range(n_nodes)]

    def to_json(self) -> str:
        labels = {str(k): list(v) for k, v in sorted(self.node_labels.items())}
        return json.dumps({"doc_id": self.doc_id, "html": self.html, "labels": labels}, ensure_ascii=False)

    @classmethod
    def from_json(cls, line: str) -> "LabeledDocument":
        d = json.loads(line)
        labels = {}
        for k, v in d.get("labels", {}).items():
            if len(v) != len(LABELS):
                raise ValueError(f"{d['doc_id']}: node {k} has {len(v)} labels, expected {len(LABELS)}")
            labels[int(k)] = tuple(bool(b) for b in v)
        return cls(str(d["doc_id"]), d["html"], labels)


def write_corpus(docs: Iterable[LabeledDocument], path: str | os.PathLike) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for doc in docs:
            f.write(doc.to_json() + "\n")


def read_corpus(path: str | os.PathLike) -> list[LabeledDocument]:
    with open(path, encoding="utf-8") as f:
        return [LabeledDocument.from_json(line) for line in f if line.strip()]


def _labels(*idx: int) -> tuple[bool, ...]:
    return tuple(i in idx for i in range(len(LABELS)))


NONE = _labels()
P_TITLE = _labels(PRIMARY, TITLE)
P_HEADING = _labels(PRIMARY, HEADING)
P_PARA = _labels(PRIMARY, PARAGRAPH)
P_TABLE = _labels(PRIMARY, TABLE)
P_LIST = _labels(PRIMARY, LIST)


class _PageBuilder:
    """Accumulates HTML and the (text, labels) of each node it should produce, in visit order."""

    def __init__(self, rng: random.Random):
        self.rng = rng
        self.parts: list[str] = []
        self.expected: list[tuple[str, tuple[bool, ...]]] = []

    def raw(self, s: str):
        self.parts.append(s)

    def text_el(self, tag: str, pieces: list, labels, attrs: str = "", inline_labels=None):
        """``pieces`` holds plain strings and ``(inline_tag, text)`` pairs."""
        inline_labels = labels if inline_labels is None else inline_labels
        out, own, inline = [f"<{tag}{attrs}>"], [], []
        for piece in pieces:
            if isinstance(piece, str):
                out.append(htmlmod.escape(piece))
                own.append(piece)
            else:
                itag, itext = piece
                href = ' href="#"' if itag == "a" else ""
                out.append(f"<{itag}{href}>{htmlmod.escape(itext)}</{itag}>")
                inline.append(itext)
        out.append(f"</{tag}>")
        self.parts.append("".join(out))
        text = normalize_text(" ".join(own))
        if text:
            self.expected.append((text, labels))
        for itext in inline:
            self.expected.append((normalize_text(itext), inline_labels))

    def list_el(self, tag: str, items: list[str], labels, link: bool = False, attrs: str = ""):
        inner = "".join(
            f"<li><a href=\"#\">{htmlmod.escape(i)}</a></li>" if link else f"<li>{htmlmod.escape(i)}</li>"
            for i in items
        )
        self.parts.append(f"<{tag}{attrs}>{inner}</{tag}>")
        self.expected.append((normalize_text(" ".join(items)), labels))

    def table_el(self, rows: list[list[str]], labels):
        out = ["<table>"]
        for r, row in enumerate(rows):
            cell = "th" if r == 0 else "td"
            out.append("<tr>" + "".join(f"<{cell}>{htmlmod.escape(c)}</{cell}>" for c in row) + "</tr>")
        out.append("</table>")
        self.parts.append("\n".join(out))
        self.expected.append((normalize_text(" ".join(c for row in rows for c in row)), labels))

    def html(self) -> str:
        return "\n".join(self.parts)


class _Page:
    def __init__(self, spec: SyntheticSpec, rng: random.Random):
        self.spec = spec
        self.rng = rng
        self.topic = rng.choice(sorted(spec.topic_words))
        self.words = spec.topic_words[self.topic]
        self.site = f"{rng.choice(SITE_A)} {rng.choice(SITE_B)}"

    # text helpers
    def sentence(self, lo=8, hi=18) -> str:
        r = self.rng
        words = [r.choice(self.words) if r.random() < 0.6 else r.choice(self.spec.function_words)
                 for _ in range(r.randint(lo, hi))]
        return words[0].capitalize() + " " + " ".join(words[1:]) + r.choice([".", ".", ".", "!", "?"])

    def headline(self, lo=3, hi=8, words=None) -> str:
        words = words or self.words
        ws = [self.rng.choice(words) for _ in range(self.rng.randint(lo, hi))]
        return " ".join(w.capitalize() if i == 0 or self.rng.random() < 0.5 else w for i, w in enumerate(ws))

    def other_headline(self) -> str:
        other = self.spec.topic_words[self.rng.choice(sorted(self.spec.topic_words))]
        return self.headline(4, 9, other)

    def date(self) -> str:
        r = self.rng
        return f"{r.choice(MONTHS)} {r.randint(1, 28)}, {r.randint(2015, 2024)}"

    def person(self) -> str:
        return f"{self.rng.choice(FIRST_NAMES)} {self.rng.choice(LAST_NAMES)}"

    # boilerplate blocks
    def nav(self, b: _PageBuilder):
        items = self.rng.sample(NAV_ITEMS, self.rng.randint(4, 9))
        style = self.rng.randrange(3)
        b.raw('<nav class="menu">')
        if style == 0:
            b.list_el("ul", items, NONE, link=True)
        elif style == 1:
            b.raw('<div class="links">')
            for it in items:
                b.text_el("a", [it], NONE, ' href="#"')
            b.raw("</div>")
        else:
            pieces = []
            for i, it in enumerate(items):
                if i:
                    pieces.append(" | ")
                pieces.append(("a", it))
            b.text_el("p", pieces, NONE)
        b.raw("</nav>")

    def header(self, b: _PageBuilder):
        b.raw('<header class="site-header">')
        b.text_el("div", [("a", self.site)], NONE, ' class="logo"')
        for _ in range(self.rng.randint(*self.spec.boilerplate_menu_range)):
            self.nav(b)
        b.raw("</header>")

    def cookie(self, b: _PageBuilder):
        b.raw('<div class="cookie-banner">')
        b.text_el("p", [self.rng.choice(COOKIE_TEXTS)], NONE)
        for label in self.rng.sample(COOKIE_BUTTONS, self.rng.randint(1, 2)):
            b.text_el("button", [label], NONE)
        b.raw("</div>")

    def breadcrumb(self, b: _PageBuilder):
        b.text_el("div", [("a", "Home"), " » ", ("a", self.topic.capitalize())], NONE, ' class="breadcrumb"')

    def byline(self, b: _PageBuilder):
        form = self.rng.randrange(3)
        if form == 0:
            b.text_el("p", [f"By {self.person()} | {self.date()}"], NONE, ' class="byline"')
        elif form == 1:
            b.text_el("div", ["By ", ("a", self.person()), f" Published {self.date()}"], NONE, ' class="meta"')
        else:
            b.text_el("span", [f"Updated {self.date()} · {self.rng.randint(2, 12)} min read"], NONE)

    def share(self, b: _PageBuilder):
        pieces = ["Share this article:"] + [("a", s) for s in self.rng.sample(SHARE_ITEMS, self.rng.randint(2, 5))]
        b.text_el("div", pieces, NONE, ' class="share"')

    def ad(self, b: _PageBuilder):
        b.raw('<div class="ad-slot">')
        b.text_el(self.rng.choice(["p", "span", "div"]), [self.rng.choice(AD_TEXTS)], NONE)
        b.raw("</div>")

    def read_more(self, b: _PageBuilder):
        b.text_el("p", [self.rng.choice(["Read more:", "Related:", "See also:"]), ("a", self.other_headline())],
                  NONE, ' class="related-inline"')

    def sidebar(self, b: _PageBuilder):
        b.raw('<aside class="sidebar">')
        head = self.rng.choice(SIDEBAR_HEADS).format(site=self.site)
        b.text_el(self.rng.choice(["h3", "h4", "p", "div"]), [head], NONE)
        items = [self.other_headline() for _ in range(self.rng.randint(3, 6))]
        style = self.rng.randrange(3)
        if style == 0:
            b.list_el("ul", items, NONE, link=True)
        elif style == 1:
            for it in items:
                b.text_el("h4", [("a", it)], NONE)
        else:
            for it in items:
                b.text_el("p", [it], NONE, ' class="teaser"')
        b.raw("</aside>")

    def newsletter(self, b: _PageBuilder):
        b.raw('<div class="newsletter">')
        b.text_el(self.rng.choice(["h3", "h4", "strong"]), [self.rng.choice(NEWSLETTER_HEADS)], NONE)
        b.text_el("p", [self.rng.choice(NEWSLETTER_TEXTS)], NONE)
        b.text_el("button", ["Sign up"], NONE)
        b.raw("</div>")

    def comments(self, b: _PageBuilder):
        b.raw('<section class="comments">')
        b.text_el("h3", [f"Comments ({self.rng.randint(0, 120)})"], NONE)
        b.text_el("p", [self.rng.choice(COMMENT_TEXTS)], NONE)
        b.raw("</section>")

    def footer(self, b: _PageBuilder):
        b.raw('<footer class="site-footer">')
        links = self.rng.sample(FOOTER_LINKS, self.rng.randint(3, 6))
        if self.rng.random() < 0.5:
            b.list_el("ul", links, NONE, link=True)
        else:
            b.raw('<div class="footer-links">')
            for it in links:
                b.text_el("a", [it], NONE, ' href="#"')
            b.raw("</div>")
        for legal in self.rng.sample(LEGAL_TEXTS, self.rng.randint(1, 2)):
            b.text_el("p", [legal.format(site=self.site)], NONE)
        b.text_el("p", [f"© {self.rng.randint(2015, 2024)} {self.site}. All rights reserved."], NONE)
        b.raw("</footer>")

    # primary blocks
    def paragraph(self, b: _PageBuilder):
        r = self.rng
        sentences = [self.sentence() for _ in range(r.randint(1, 3))]
        text = " ".join(sentences)
        if r.random() < 0.25:
            words = text.split()
            cut = r.randint(1, max(1, len(words) - 3))
            span = r.randint(1, 3)
            inline = (r.choice(["a", "b", "em", "strong"]), " ".join(words[cut : cut + span]))
            pieces = [" ".join(words[:cut]) + " ", inline, " " + " ".join(words[cut + span :])]
        else:
            pieces = [text]
        tag = "blockquote" if r.random() < 0.05 else "p"
        if tag == "blockquote":
            b.raw("<blockquote>")
            b.text_el("p", pieces, P_PARA)
            b.raw("</blockquote>")
        else:
            b.text_el("p", pieces, P_PARA)

    def heading(self, b: _PageBuilder):
        text = self.headline(2, 6)
        if self.rng.random() < 0.3:
            b.raw("<p>")
            b.text_el(self.rng.choice(["strong", "b"]), [text], P_HEADING)
            b.raw("</p>")
        else:
            b.text_el(self.rng.choice(["h2", "h3"]), [text], P_HEADING)

    def table(self, b: _PageBuilder):
        r = self.rng
        n_cols = r.randint(2, 4)
        rows = [[self.headline(1, 2) for _ in range(n_cols)]]
        for _ in range(r.randint(2, 5)):
            rows.append([r.choice(self.words) if c == 0 else str(r.randint(1, 999)) for c in range(n_cols)])
        b.table_el(rows, P_TABLE)

    def content_list(self, b: _PageBuilder):
        items = [self.sentence(3, 8) for _ in range(self.rng.randint(3, 6))]
        b.list_el(self.rng.choice(["ul", "ol"]), items, P_LIST)

    def article(self, b: _PageBuilder):
        r = self.rng
        b.raw('<main><article class="post">')
        title = self.headline(4, 9)
        b.text_el("h1", [title], P_TITLE)
        if r.random() < 0.8:
            self.byline(b)
        if r.random() < 0.4:
            self.share(b)
        n_par = r.randint(*self.spec.primary_paragraph_range)
        extras = []
        if r.random() < self.spec.table_prob:
            extras.append(self.table)
        if r.random() < self.spec.list_prob:
            extras.append(self.content_list)
        blocks = [self.paragraph] * n_par + extras
        r.shuffle(blocks)
        blocks.insert(0, self.paragraph)
        for i, block in enumerate(blocks):
            if i and r.random() < 0.3:
                self.heading(b)
            if i and r.random() < 0.12:
                self.ad(b) if r.random() < 0.5 else self.read_more(b)
            block(b)
        if r.random() < 0.5:
            self.share(b)
        b.raw("</article></main>")
        return title

    def build(self) -> str:
        r = self.rng
        b = _PageBuilder(r)
        title_slot = len(b.parts)
        b.raw("")  # filled in once the title is known
        b.raw("<body>")
        if r.random() < 0.5:
            self.cookie(b)
        self.header(b)
        if r.random() < 0.6:
            self.breadcrumb(b)
        sidebar_first = r.random() < 0.3
        wrappers = r.randint(0, 3)
        if sidebar_first:
            self.sidebar(b)
        b.raw('<div class="wrap">' * wrappers)
        title = self.article(b)
        b.raw("</div>" * wrappers)
        if not sidebar_first and r.random() < 0.8:
            self.sidebar(b)
        if r.random() < 0.5:
            self.newsletter(b)
        if r.random() < 0.4:
            self.comments(b)
        self.footer(b)
        b.raw('<script>var trackerSentinel = "SCRIPT_SENTINEL";</script>')
        b.raw("</body></html>")
        head_title = f"{title} - {self.site}"
        b.parts[title_slot] = (
            '<!DOCTYPE html>\n<html lang="en"><head><meta charset="utf-8">'
            f"<title>{htmlmod.escape(head_title)}</title>"
            "<style>.sentinel{content:'STYLE_SENTINEL'}</style>"
            "<!-- COMMENT_SENTINEL --></head>"
        )
        b.expected.insert(0, (normalize_text(head_title), NONE))
        self.expected = b.expected
        return b.html()


def _generate_page(spec: SyntheticSpec, index: int) -> LabeledDocument:
    doc_id = f"{spec.doc_prefix}-{spec.seed}-{index:06d}"
    lo, hi = spec.primary_fraction_range
    for attempt in range(100):
        rng = random.Random(f"{spec.seed}:{index}:{attempt}")
        page = _Page(spec, rng)
        html = page.build()
        expected = page.expected
        n_primary = sum(lab[PRIMARY] for _, lab in expected)
        if lo <= n_primary / len(expected) <= hi:
            break
    else:
        raise RuntimeError(f"{doc_id}: no page inside primary_fraction_range {spec.primary_fraction_range}")
    nodes = html_to_nodes(html)
    got = [n.text for n in nodes]
    want = [t for t, _ in expected]
    if got != want:
        raise AssertionError(f"{doc_id}: generator and pipeline disagree on node texts")
    labels = {i: lab for i, (_, lab) in enumerate(expected) if any(lab)}
    return LabeledDocument(doc_id, html, labels)


def iter_synthetic_corpus(spec: SyntheticSpec) -> Iterator[LabeledDocument]:
    for i in range(spec.n_pages):
        yield _generate_page(spec, i)


def generate_synthetic_corpus(spec: SyntheticSpec) -> list[LabeledDocument]:
    """Generate ``spec.n_pages`` labeled pages; a pure function of ``spec``."""
    return list(iter_synthetic_corpus(spec))
