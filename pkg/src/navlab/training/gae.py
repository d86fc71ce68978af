"""Generalized advantage estimation."""

import numpy as np


def gae(rewards, values, dones, bootstrap, gamma, lam):
    """Backward-recursive GAE over (T,) or (T, N) float arrays.

    delta_t = r_t + gamma * v_{t+1} * (1 - done_t) - v_t
    A_t     = delta_t + gamma * lam * (1 - done_t) * A_{t+1}

    Returns (advantages, returns) in float64; returns = advantages + values.
    """
    rewards = np.asarray(rewards, dtype=np.float64)
    values = np.asarray(values, dtype=np.float64)
    not_done = 1.0 - np.asarray(dones, dtype=np.float64)
    bootstrap = np.asarray(bootstrap, dtype=np.float64)
    t_len = rewards.shape[0]
    adv = np.zeros_like(rewards)
    carry = np.zeros_like(bootstrap)
    next_value = bootstrap
    for t in range(t_len - 1, -1, -1):
        delta = rewards[t] + gamma * next_value * not_done[t] - values[t]
        carry = delta + gamma * lam * not_done[t] * carry
        adv[t] = carry
        next_value = values[t]
    return adv, adv + values


def normalize_advantages(adv):
    """Zero-mean, unit-std advantages (computed in float64 over the batch)."""
    adv = np.asarray(adv, dtype=np.float64)
    return (adv - adv.mean()) / (adv.std() + 1e-8)
