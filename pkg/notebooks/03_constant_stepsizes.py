# %% [markdown]
# # Fixed horizons and random iterates
#
# When the number of steps n0 is known in advance a constant stepsize tuned
# to n0 gives an explicit last-iterate rate.  In Euclidean space a randomly
# chosen iterate has a simpler squared-residual guarantee.

# %%
import math

import numpy as np

from skmfix import bounds as B
from skmfix.harness import ExperimentConfig, make_operator, random_iterate_study, run_experiment
from skmfix.noise import NoiseModel
from skmfix.sequences import StepsizeSchedule

# %%
for n0 in (10**2, 10**3, 10**4):
    s = run_experiment(ExperimentConfig(schedule="constant", a_or_alpha="auto", n_steps=n0,
                                        checkpoints=[n0], replications=100, master_seed=3,
                                        bounds=("constant", "fixed_horizon")))
    print(f"n0={n0:>6}  alpha={B.auto_alpha(n0):.2e}  mean={s.mean[0]:.4f}  "
          f"exact={s.bounds['constant'][0]:.3f}  closed={s.bounds['fixed_horizon'][0]:.3f}")

# %% [markdown]
# Random iterate: draw k with probability proportional to alpha_k (1 - alpha_k)
# and report ||T x_k - x_k||^2.

# %%
n0 = 10**4
sched = StepsizeSchedule.constant(1 / math.sqrt(n0 + 1))
op = make_operator("sgd-quadratic")
x0 = np.ones(op.dim)
sq = random_iterate_study(op, sched, NoiseModel.iid(op.dim, 1.0), x0, n0, 100, 10, master_seed=9)
R = op.dist_to_fix(x0)
print("mean squared residual", sq.mean())
print("bound", B.bound_euclidean_sq(R, 1.0, 1.0, sched, n0))
print("closed form (not squared)", B.euclidean_fixed_horizon(R, 1.0, 1.0, n0))

# %% [markdown]
# A Markov-inequality version: with probability at least 1 - p the residual
# is below b / p.

# %%
b = B.bound_euclidean(R, 1.0, 1.0, sched, n0)
for p in (0.5, 0.1, 0.01):
    print(p, B.high_prob_bound(b, p))
