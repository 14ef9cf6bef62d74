# %% [markdown]
# # Logic-driven and numeric design
#
# Klaus removes edges in random order as long as K stays satisfiable, then
# fits the weights once. Theseus fits the complete graph and prunes small
# weights. The two finishers start from a Theseus result.

# %%
from klauskit import KlausConfig, OptimizerConfig, get_target, klaus, klaus_opt, theseus, theseus_opt

target = get_target("GHZ_6_2").ket
k = klaus(target, KlausConfig(seed=0))
print("klaus", k.edge_count, "edges, F =", round(k.fidelity, 6), k.elapsed)

t = theseus(target, OptimizerConfig(seed=0))
print("theseus", t.edge_count, "edges, F =", round(t.fidelity, 6))
to = theseus_opt(t, target, OptimizerConfig(seed=0))
ko = klaus_opt(t.graph, target, KlausConfig(seed=0))
print("theseusopt", to.edge_count, "edges in", round(to.phase_ms("opt_ms")), "ms")
print("klausopt", ko.edge_count, "edges, SAT phase", round(ko.phase_ms("sat_ms")), "ms")

# %% [markdown]
# A target with no exact graph: Theseus settles on an approximation, and
# Klaus reports that it did not converge.

# %%
star = get_target("SRV_544_star").ket
print("theseus F =", round(theseus(star, OptimizerConfig(seed=0)).fidelity, 4))
s = klaus(star, KlausConfig(seed=0))
print("klaus converged:", s.converged, s.notes)
