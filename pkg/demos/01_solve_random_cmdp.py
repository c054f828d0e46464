"""
Generating and solving a random constrained MDP
===============================================

Draw an instance, solve it exactly with the occupancy LP and check the
answer against enumeration on a smaller instance.
"""
import numpy as np

from cmdp_lab import generate_random_cmdp, solve_cmdp_lp
from cmdp_lab.core import eval_policy_exact
from cmdp_lab.oracle import brute_force_constrained_opt, unconstrained_max

# a 30-state, 3-action, horizon-10 instance; r1 = 1 - r0 pulls against r0
cmdp, gap = generate_random_cmdp(seed=0, X=30, A=3, H=10)
print("threshold b =", cmdp.thresholds[0], " slater gap =", gap)

# the best r0 value ignoring the constraint is an upper bound
free, _ = unconstrained_max(cmdp, 0)
v_star, w, policy = solve_cmdp_lp(cmdp)
print(f"unconstrained {free:.4f}  constrained {v_star:.4f}")

# the LP policy attains v_star and meets the threshold
x1 = cmdp.initial_state
print("V[r0] =", eval_policy_exact(cmdp, 0, policy).V[0, x1])
print("V[r1] =", eval_policy_exact(cmdp, 1, policy).V[0, x1])

# with one constraint the optimum randomizes in very few reached cells;
# unreached cells get uniform rows by convention and are skipped here
reached = w.sum(axis=-1) > 1e-12
mixed = np.sum(reached & (policy.max(axis=-1) < 1 - 1e-9))
print("reached (h, x) cells:", reached.sum(), " randomized among them:", mixed)

# r1 = 1 - r0, so V[r0] + V[r1] = H for every policy
print("V[r0] + V[r1] =", eval_policy_exact(cmdp, 0, policy).V[0, x1] + eval_policy_exact(cmdp, 1, policy).V[0, x1])

# small instances can be enumerated exhaustively
tiny, _ = generate_random_cmdp(seed=3, X=3, A=2, H=3)
print("lp", solve_cmdp_lp(tiny)[0], " brute force", brute_force_constrained_opt(tiny))
