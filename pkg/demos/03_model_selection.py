# ---
# jupyter:
#   jupytext:
#     formats: py:percent
#   kernelspec:
#     display_name: Python 3
#     language: python
#     name: python3
# ---

# %% [markdown]
# # Choosing the number of components and the penalty
#
# `model_search` fits every pair on a grid and keeps the one with the
# largest BIC, where the parameter count tracks the nonzero precision
# entries.

# %%

from gwmix import ari, make_scenario, model_search
from gwmix.serialize import standardize

_, truth = make_scenario("equal-edges", seed=3)
X, _, _ = standardize(truth.X)

res = model_search(X, K_candidates=(1, 2, 3), strategy="inverse", n_grid=15)
best = res.best
print("selected K =", best.K, " lambda =", round(best.lam, 3), " d0 =", best.d0)
print("ARI against the truth:", round(ari(truth.labels, best.labels), 3))

# %% [markdown]
# The full table keeps failed candidates (for example a component that
# collapsed) alongside the successful ones.

# %%
for K in (1, 2, 3):
    rows = [e for e in res.table if e.K == K]
    ok = [e for e in rows if e.report is not None]
    top = max(ok, key=lambda e: e.bic) if ok else None
    print(f"K={K}: {len(ok)}/{len(rows)} fitted, best BIC "
          f"{top.bic:.1f} at lambda {top.lam:.3f}" if top else f"K={K}: none fitted")
