# %% [markdown]
# # Graphs and the states they generate
#
# A graph on n vertices with colored, weighted edges produces a state by
# summing over perfect matchings. Each matching colors every vertex, and the
# product of its edge weights is added to the amplitude of that coloring.

# %%
import itertools

from klauskit import ColoredGraph, EdgeKey, enumerate_pairings, graph_to_state, matchings_for_coloring

for n in (2, 4, 6, 8):
    print(n, "vertices:", len(enumerate_pairings(n)), "pairings")

# %% [markdown]
# The four-edge graph below makes GHZ(4,2): one matching in color 0 and one
# in color 1. No other coloring has a complete matching.

# %%
g = ColoredGraph(4, 2, [EdgeKey(0, 1, 0, 0), EdgeKey(2, 3, 0, 0), EdgeKey(0, 2, 1, 1), EdgeKey(1, 3, 1, 1)])
print(graph_to_state(g))
for c in itertools.product(range(2), repeat=4):
    pms = matchings_for_coloring(g, c)
    if pms:
        print(c, [[str(e) for e in pm] for pm in pms])

# %% [markdown]
# Adding one stray edge can complete a matching for a coloring we do not want.

# %%
h = ColoredGraph(4, 2, list(g.edges) + [EdgeKey(0, 1, 1, 1)])
print(graph_to_state(h))
