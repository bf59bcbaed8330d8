"""
From HTML to a node sequence
============================

A page is parsed into an element tree and walked depth-first. Only elements
that own text directly, plus whole tables and lists, survive. The visit order
is the node id.
"""
from neuscrape import chunk_sequence, html_to_nodes, parse_html
from neuscrape.dom import nodes_to_jsonl

html = """
<html><head><title>Weekend markets</title><script>track()</script></head>
<body>
  <nav><ul><li><a href="/">Home</a></li><li><a href="/food">Food</a></li></ul></nav>
  <article>
    <h1>Where to shop on Saturday</h1>
    <p>The harbor market opens at <b>eight</b> and closes at noon.
    <p>Arrive early for bread; it sells out.
    <table><tr><th>Stall</th><th>Best for</th></tr><tr><td>North</td><td>cheese</td></tr></table>
  </article>
  <!-- a comment is never text -->
  <footer><p>&copy; 2024 Local Guide</p></footer>
</body></html>
"""

###############################################################################
# Malformed markup is fine: the second ``<p>`` is never closed, and the
# parser closes it when the table starts.
tree = parse_html(html)
nodes = html_to_nodes(html)
for n in nodes:
    print(f"{n.node_id:2d} {n.kind.value:5s} <{n.tag}> depth={n.depth}  {n.text!r}")

###############################################################################
# ``<b>eight</b>`` becomes its own node, because the ``<p>`` only owns the
# text around it. The table collapses into a single node.

###############################################################################
# Long pages are split into fixed-size chunks for the model.
for chunk in chunk_sequence(nodes, max_nodes=4, doc_id="markets"):
    print(chunk.chunk_index, [n.node_id for n in chunk.nodes])

###############################################################################
# The same nodes as debug JSONL (what ``neuscrape nodes`` prints).
print(nodes_to_jsonl("markets", nodes[:2]), end="")
