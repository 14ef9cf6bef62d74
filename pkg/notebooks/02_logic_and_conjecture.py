# %% [markdown]
# # Feasibility as satisfiability
#
# Edge presence becomes a Boolean variable. K asks that every target coloring
# keeps at least one present matching and that no other coloring keeps
# exactly one (a single matching cannot be cancelled).

# %%
from klauskit import MONO, build_k, check_monochromatic_conjecture, ghz, solve, to_dimacs

enc = build_k(ghz(4, 2))
cnf = enc.cnf
print(len(enc.variables), "edge variables,", cnf.num_aux, "auxiliaries,", cnf.num_clauses, "clauses")
print(to_dimacs(cnf).splitlines()[0])
out = solve(cnf)
print(out.status, [str(e) for e in cnf.decode_edges(out.model)])

# %% [markdown]
# With single-colored edges only, GHZ states with more than two colors run
# out of room: the checker proves K unsatisfiable.

# %%
for n, d in [(4, 2), (6, 2), (6, 3)]:
    r = check_monochromatic_conjecture(n, d)
    print((n, d), r.status, f"{r.cases} cases, {r.elapsed:.2f} s")
