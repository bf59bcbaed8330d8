"""
A labeled synthetic corpus
==========================

Real main-content labels are hard to come by, so the package ships a page
generator. Each page mixes an article (title, headings, paragraphs, maybe a
table and a list) with boilerplate such as menus, cookie banners, sidebars
and footers. Labels are attached to node ids after running the real
pipeline, so they always line up.
"""
import collections

from neuscrape import SyntheticSpec, generate_synthetic_corpus, html_to_nodes
from neuscrape.model import LABELS, PRIMARY

docs = generate_synthetic_corpus(SyntheticSpec(n_pages=50, seed=3))
doc = docs[0]
nodes = html_to_nodes(doc.html)
labels = doc.labels_for(len(nodes))

for n, lab in zip(nodes[:25], labels):
    names = [name for name, on in zip(LABELS, lab) if on]
    print(f"{n.node_id:3d} <{n.tag:6s}> {('+'.join(names) or '-'):18s} {n.text[:60]}")

###############################################################################
# How much of each page is primary content?
fractions = []
tags = collections.Counter()
for d in docs:
    ns = html_to_nodes(d.html)
    lab = d.labels_for(len(ns))
    fractions.append(sum(x[PRIMARY] for x in lab) / len(ns))
    tags.update(n.tag for n, x in zip(ns, lab) if not x[PRIMARY])
print(f"primary fraction: min {min(fractions):.2f}, mean {sum(fractions) / len(fractions):.2f}, max {max(fractions):.2f}")

###############################################################################
# Boilerplate is not only ``<li>`` and ``<a>``; some of it hides in ``<p>``
# and heading tags, so a tag-based rule cannot solve the task.
print("boilerplate tags:", tags.most_common(8))
