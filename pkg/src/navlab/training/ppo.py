"""Clipped-surrogate PPO losses and the recurrent minibatch update."""

import numpy as np

from ..nd import Tensor, clip_grad_norm, ops


def ppo_losses(logits, values, actions, old_log_probs, advantages, returns, clip_eps):
    """Build the clipped-surrogate actor loss, value loss and entropy.

    logits/values are graph tensors from the replay forward pass; everything
    else is constant. Returns Tensors plus numpy diagnostics (ratios and both
    surrogates) for property checks.
    """
    logp_all = ops.log_softmax(logits, axis=-1)
    logp = ops.gather_rows(logp_all, actions)
    ratio = ops.exp(ops.sub(logp, Tensor(np.asarray(old_log_probs, dtype=np.float32))))
    adv = Tensor(np.asarray(advantages, dtype=np.float32))
    surr_raw = ops.mul(ratio, adv)
    surr_clipped = ops.mul(ops.clip(ratio, 1.0 - clip_eps, 1.0 + clip_eps), adv)
    actor_loss = ops.neg(ops.mean(ops.minimum(surr_raw, surr_clipped)))
    diff = ops.sub(values, Tensor(np.asarray(returns, dtype=np.float32)))
    value_loss = ops.mean(ops.mul(diff, diff))
    probs = ops.exp(logp_all)
    entropy = ops.neg(ops.mean(ops.sum_(ops.mul(probs, logp_all), axis=-1)))
    diagnostics = {
        "ratio": ratio.data.copy(),
        "surrogate_raw": surr_raw.data.copy(),
        "surrogate_clipped": surr_clipped.data.copy(),
        "surrogate_used": np.minimum(surr_raw.data, surr_clipped.data),
    }
    return actor_loss, value_loss, entropy, diagnostics


def _replay_group(model, buffer, group, advantages, returns, clip_eps):
    """Forward the stored (T, m) window for one env group and build the losses."""
    t_len = buffer.actions.shape[0]
    m = len(group)
    obs = buffer.obs[:, group].reshape((t_len * m,) + buffer.obs.shape[2:])
    uids = buffer.goal_uids[:, group].reshape(-1)
    unique, inverse = np.unique(uids, return_inverse=True)
    goals = np.stack([buffer.goals[uid] for uid in unique])
    zk = None
    if buffer.zk is not None:
        zk = buffer.zk[:, group].reshape(t_len * m, -1)
    embeds = model.encoder.encode_indexed(obs, goals, inverse, zk=zk)

    policy = model.policy
    hidden = Tensor(buffer.initial_hidden[group])
    states = []
    for t in range(t_len):
        if t > 0:
            mask = (1.0 - buffer.dones[t - 1, group]).astype(np.float32)
            hidden = ops.mul(hidden, Tensor(mask[:, None]))
        rows = np.arange(t * m, (t + 1) * m)
        x = ops.concat([ops.index_select0(embeds, rows),
                        policy.action_embed(_prev_tokens(buffer.prev_actions[t, group]))], axis=1)
        hidden = policy.cell.step(hidden, x)
        states.append(hidden)
    stacked = ops.concat(states, axis=0)
    logits = policy.actor(stacked)
    values = ops.reshape(policy.critic(stacked), (t_len * m,))

    flat = lambda a: a[:, group].reshape(-1)
    return ppo_losses(logits, values, flat(buffer.actions),
                      flat(buffer.log_probs), flat(advantages), flat(returns), clip_eps)


def _prev_tokens(prev_actions):
    from ..policy import START_TOKEN
    prev = np.asarray(prev_actions, dtype=np.int64)
    return np.where(prev < 0, START_TOKEN, prev)


def ppo_update(buffer, model, optimizer, cfg, lr, perm_rng, advantages, returns):
    """Run the configured epochs of sequence-preserving minibatch updates.

    Minibatches split environments, never time, so recurrent state replays
    correctly. A non-finite loss aborts the update with parameters untouched.
    """
    n_envs = buffer.actions.shape[1]
    sums = {"actor_loss": 0.0, "value_loss": 0.0, "entropy": 0.0, "grad_norm": 0.0}
    count = 0
    aborted = False
    for _ in range(cfg.epochs):
        order = perm_rng.permutation(n_envs)
        for chunk in np.array_split(order, cfg.minibatches):
            group = np.sort(chunk)
            actor_loss, value_loss, entropy, _ = _replay_group(
                model, buffer, group, advantages, returns, cfg.clip_eps)
            total = ops.sub(ops.add(actor_loss, ops.mul(value_loss, cfg.value_coef)),
                            ops.mul(entropy, cfg.entropy_coef))
            if not np.isfinite(total.data).all():
                aborted = True
                break
            model.zero_grad()
            total.backward()
            norm = clip_grad_norm(optimizer.params, cfg.max_grad_norm)
            optimizer.step(lr=lr)
            sums["actor_loss"] += actor_loss.item()
            sums["value_loss"] += value_loss.item()
            sums["entropy"] += entropy.item()
            sums["grad_norm"] += norm
            count += 1
        if aborted:
            break
    stats = {k: (v / count if count else float("nan")) for k, v in sums.items()}
    stats["aborted"] = aborted
    stats["minibatches_done"] = count
    return stats
