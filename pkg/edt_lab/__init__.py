# Extended delivery time toolkit: analytic laws, Monte Carlo ground truth, queueing delay.
