"""
Regret of gradient descent with memory
======================================

Each round's loss depends on the last ``m`` decisions. The learner still
steps along the gradient of the loss with every slot set to the current
point, and the regret stays below ``2 G D sqrt(m T)``.
"""

import numpy as np

from memarb.memory_core import (
    DecisionSet,
    adversarial_quadratics,
    empirical_regret,
    offline_comparator,
    regret_bound,
    run_ogd_memory,
    theorem1_learning_rate,
)

ball = DecisionSet.ball(5)
m = 3

###############################################################################
# Quadratic losses whose centres flip sign every round, so no single point
# is good for long. ``G`` bounds the gradients on the unit ball.

print(f"{'T':>6} {'regret':>10} {'bound':>10} {'ratio':>8}")
horizons = [100, 316, 1000, 3162]
means = []
for T in horizons:
    losses, G = adversarial_quadratics(T, ball.dimension, m, seed=T)
    eta = theorem1_learning_rate(ball.diameter, G, m, T)
    run = run_ogd_memory(losses, ball, eta)
    best = offline_comparator(losses, ball)
    R = empirical_regret(run.decisions, best.x, losses).total
    B = regret_bound(G, ball.diameter, m, T)
    means.append(max(R, 1.0))
    print(f"{T:6d} {R:10.3f} {B:10.1f} {R / B:8.4f}")

###############################################################################
# The fitted log-log slope stays well under one: regret grows sublinearly.

slope = np.polyfit(np.log(horizons), np.log(means), 1)[0]
print(f"log-log slope: {slope:.3f}")

###############################################################################
# Swapping the true window for ``m`` copies of the current point changes the
# loss by at most ``m eta G^2``, since consecutive points move by ``eta G``.

gaps = run.substitution_gaps()
print(f"largest window gap {gaps.max():.2e} <= m eta G^2 = {m * eta * G**2:.2e}")
