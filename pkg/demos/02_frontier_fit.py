"""Estimate a stochastic frontier where weather drives inefficiency.

A synthetic panel is drawn with known coefficients, the model is fitted by
maximum likelihood and the estimates are compared with the truth. Expected
inefficiency per observation then comes from the conditional mean given the
composed residual.
"""
import numpy as np

from climfront import modelspec, recovery, sfa

config = recovery.RecoveryConfig()
spec = config.spec
panel = sfa.simulate_panel(spec, config.beta, config.gamma, config.sigma_v, seed=11)
design = modelspec.build_design(panel, spec)
res = sfa.fit(design)

truth = config.truth(res.z_names)
table = res.table()
table["truth"] = [truth.get(k, np.nan) for k in table.index]
print(f"status {res.status}, log-likelihood {res.loglik:.2f}, {res.n_obs} rows in {res.n_clusters} clusters")
print(table.round(4), "\n")

print("mean expected inefficiency:", round(float(res.e_u.mean()), 4))
print("elasticity of output to capital at the first row:",
      round(sfa.elasticity(res.coefs(), panel.iloc[0][["T", "R", "lnk"]]), 4))

# A small Monte Carlo check of estimator bias and interval coverage
draws = recovery.run_recovery(recovery.RecoveryConfig(n_countries=20, n_years=30), n_reps=8, seed=1, n_jobs=1)
print("\n", recovery.summarize(draws).round(3))
