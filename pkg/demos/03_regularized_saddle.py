"""
The entropy-regularized saddle point
====================================

With an entropy bonus tau on the policy and tau/2 |lambda|^2 on the
multiplier, the Lagrangian has a unique saddle point. As tau shrinks its
value approaches the constrained optimum.
"""
from cmdp_lab import generate_random_cmdp, solve_cmdp_lp
from cmdp_lab.core import eval_policy_exact
from cmdp_lab.oracle import regularized_saddle

cmdp, gap = generate_random_cmdp(seed=1, X=6, A=3, H=4)
v_star = solve_cmdp_lp(cmdp)[0]
x1 = cmdp.initial_state
print(f"v* = {v_star:.4f}, threshold {cmdp.thresholds[0]:.4f}")

for tau in (1.0, 0.3, 0.1, 0.03, 0.01):
    sp = regularized_saddle(cmdp, tau)
    v0 = eval_policy_exact(cmdp, 0, sp.policy).V[0, x1]
    v1 = eval_policy_exact(cmdp, 1, sp.policy).V[0, x1]
    print(f"tau {tau:5.2f}  lambda {sp.lam[0]:.4f}  V[r0] {v0:.4f}  "
          f"slack {v1 - cmdp.thresholds[0]:+.4f}  iterations {sp.iterations}")
