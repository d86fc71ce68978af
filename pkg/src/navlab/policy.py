"""Recurrent actor-critic head.

Consumes the fused embedding and the previous action (a learned start token
on the first step), advances a gated recurrent state, and emits categorical
action logits plus a value estimate from the shared recurrent output.
"""

from dataclasses import dataclass

import numpy as np

from .errors import NumericalError
from .nd import Embedding, GRUCell, Linear, Module, Tensor, ops

N_ACTIONS = 4
START_TOKEN = N_ACTIONS  # row in the action-embedding table used before any action
ACTION_EMBED_DIM = 32


@dataclass
class PolicyOutput:
    logits: Tensor      # (N, 4)
    value: Tensor       # (N,)
    state: Tensor       # s_t, the shared trunk both heads read
    new_hidden: Tensor  # recurrent carry; equals state for this single-trunk policy


class PolicyNetwork(Module):
    def __init__(self, embed_dim=512, hidden_dim=512, rng=None):
        self.hidden_dim = hidden_dim
        self.action_embed = Embedding(N_ACTIONS + 1, ACTION_EMBED_DIM, rng=rng)
        self.cell = GRUCell(embed_dim + ACTION_EMBED_DIM, hidden_dim, rng=rng)
        self.actor = Linear(hidden_dim, N_ACTIONS, rng=rng, scheme="orthogonal", gain=0.01)
        self.critic = Linear(hidden_dim, 1, rng=rng, scheme="orthogonal", gain=1.0)

    def initial_state(self, n=1):
        """Zeroed hidden state; episodes always start from it."""
        return np.zeros((n, self.hidden_dim), dtype=np.float32)

    def act(self, z_fusion, prev_actions, hidden):
        """One policy step.

        z_fusion: Tensor (N, embed); prev_actions: int array (N,), -1 meaning
        "episode start"; hidden: (N, hidden_dim) array or Tensor.
        """
        if not np.isfinite(z_fusion.data).all():
            raise NumericalError("non-finite fusion embedding reached the policy")
        prev = np.asarray(prev_actions, dtype=np.int64)
        idx = np.where(prev < 0, START_TOKEN, prev)
        if not isinstance(hidden, Tensor):
            hidden = Tensor(hidden)
        x = ops.concat([z_fusion, self.action_embed(idx)], axis=1)
        state = self.cell.step(hidden, x)
        logits = self.actor(state)
        value = ops.reshape(self.critic(state), (state.shape[0],))
        return PolicyOutput(logits=logits, value=value, state=state, new_hidden=state)


def log_softmax_np(logits):
    shifted = logits - logits.max(axis=-1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=-1, keepdims=True))


def sample_action(logits, rng=None, greedy=False):
    """Draw actions from the categorical distribution over logits.

    Accepts (4,) or (N, 4) arrays (or Tensors); returns (actions, log_probs)
    as scalars or arrays accordingly. Greedy mode takes the argmax.
    """
    arr = logits.data if isinstance(logits, Tensor) else np.asarray(logits)
    single = arr.ndim == 1
    arr = np.atleast_2d(arr).astype(np.float64)
    logp = log_softmax_np(arr)
    if greedy:
        actions = arr.argmax(axis=-1)
    else:
        cdf = np.cumsum(np.exp(logp), axis=-1)
        u = rng.random(arr.shape[0])
        actions = (u[:, None] > cdf).sum(axis=-1)
        actions = np.minimum(actions, arr.shape[-1] - 1)
    taken = logp[np.arange(arr.shape[0]), actions]
    if single:
        return int(actions[0]), float(taken[0])
    return actions.astype(np.int64), taken
