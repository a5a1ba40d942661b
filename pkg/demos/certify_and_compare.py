"""
Trust, but verify: certifying a claimed equilibrium
===================================================

A learned policy pair is only as good as its certificate.  This script
checks a pair three independent ways: best-response gaps (can either
player gain by deviating?), per-action residuals (is any action strictly
better than the mixture?), and a head-to-head against two fixed defender
baselines.  It then sharpens the learned pair into an exact equilibrium
by best-response iteration and certifies that one to machine precision.
"""

import numpy as np

from diftgame.equilibrium import (
    best_response,
    certify_arne,
    compare_defenses,
    evaluate_policy_pair,
)
from diftgame.game import FnRates, RewardParams, build_game
from diftgame.ifg import Ifg, IfgNode
from diftgame.policies import PolicyPair, uniform_policy
from diftgame.training import TrainConfig, train

kinds = ["process", "file", "socket", "other"]
nodes = [IfgNode(i, kinds[i % 4], f"n{i}") for i in range(10)]
ifg = Ifg(
    nodes,
    {(0, 2), (1, 3), (2, 4), (3, 5), (4, 6), (5, 6), (6, 7), (7, 8), (8, 9)},
    {0, 1},
    [{6}, {8}, {9}],
)
ifg.validate()
game = build_game(ifg, RewardParams.defaults(3), FnRates(default=0.2))

print("training (2.5e5 simulated steps)...")
pair, _ = train(game, TrainConfig(iterations=250000, warmup=7000, seed=17))

# A certificate bundles best-response gaps for both players with the
# residual statistics.  The learned pair passes the gap test easily: no
# deviation gains more than 0.05.  The full verdict stays False because
# residuals at states the pair visits almost never remain large; the
# simulation-driven learner had no data there.
cert = certify_arne(game, pair, tol=0.5)
print(f"\nlearned pair:      gap_D={cert.gaps['D']:.4f}  "
      f"gap_A={cert.gaps['A']:.4f}  min residual {cert.min_omega:.1f}  "
      f"verdict={cert.verdict}")

# The gap check alone refutes a wrong claim: under uniform play either
# player can gain whole points by deviating.
naive = PolicyPair(uniform_policy(game, "D"), uniform_policy(game, "A"))
bad = certify_arne(game, naive, tol=0.5)
print(f"uniform pair:      gap_D={bad.gaps['D']:.4f}  "
      f"gap_A={bad.gaps['A']:.4f}  verdict={bad.verdict}")

# Alternating exact best responses converges here in a couple of rounds
# to a pure pair that neither player can improve at all.
pi_d, pi_a = naive.d, naive.a
for k in range(6):
    pi_d, gain_d = best_response(game, pi_a, "D")
    pi_a, gain_a = best_response(game, pi_d, "A")
pure = PolicyPair(pi_d, pi_a)
exact = certify_arne(game, pure, tol=1e-6)
ev = evaluate_policy_pair(game, pure)
print(f"\nbest-response fixed point: rho_D={ev.rho_d:.3f} rho_A={ev.rho_a:.3f}")
print(f"  gaps ({exact.gaps['D']:.2e}, {exact.gaps['A']:.2e}), "
      f"min residual {exact.min_omega:.2e}, verdict={exact.verdict}")

# Finally, the defender bake-off: the learned policy, a uniform
# inspector, and a static cut heuristic that always watches the next
# stage target, each evaluated against the learned attacker.
print("\ndefender baselines (against the learned attacker):")
for name, rho_d, rho_a in compare_defenses(game, pair):
    print(f"  {name:8s} rho_D={rho_d:8.2f}  rho_A={rho_a:8.2f}")
