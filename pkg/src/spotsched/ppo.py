"""Clipped-surrogate policy optimization primitives.

Returns are plain Monte-Carlo discounted sums; advantages are return minus
value baseline, normalized over the buffer. Actor and critic losses come
with hand-derived gradients that tests cross-check against central finite
differences.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .nets import Adam, Mlp, clip_grad_norm, masked_log_softmax

_NORM_EPS = 1e-8


@dataclass(frozen=True)
class TrainConfig:
    # Rewards here are immediate per-placement costs, so a short discount
    # horizon keeps the per-action signal out of the trajectory noise.
    discount: float = 0.9
    clip_epsilon: float = 0.2
    group_lr: float = 3e-4
    node_lr: float = 3e-4
    critic_lr: float = 3e-4
    epochs: int = 4
    minibatch_size: int = 64
    episodes: int = 300
    entropy_weight: float = 0.01
    grad_clip_norm: float = 0.5
    seed: int = 0

    def __post_init__(self):
        if not 0 < self.discount < 1:
            raise ValueError(f"discount must be in (0, 1), got {self.discount}")
        if self.clip_epsilon <= 0:
            raise ValueError(f"clip_epsilon must be > 0, got {self.clip_epsilon}")
        if self.epochs < 1 or self.minibatch_size < 1 or self.episodes < 1:
            raise ValueError("epochs, minibatch_size and episodes must be >= 1")
        for name in ("group_lr", "node_lr", "critic_lr"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be > 0")
        if self.entropy_weight < 0 or self.grad_clip_norm < 0:
            raise ValueError("entropy_weight and grad_clip_norm must be >= 0")


@dataclass(frozen=True)
class Transition:
    """One scheduling decision as seen by the trainer."""

    state: np.ndarray
    group: int
    node: int
    logp_group: float
    logp_node: float
    group_mask: np.ndarray
    node_mask: np.ndarray
    reward: float
    value: float
    done: bool


@dataclass
class RolloutBuffer:
    """Transitions of one episode plus derived returns and advantages."""

    transitions: list[Transition] = field(default_factory=list)
    returns: np.ndarray | None = None
    advantages: np.ndarray | None = None

    def add(self, transition: Transition) -> None:
        self.transitions.append(transition)

    def __len__(self) -> int:
        return len(self.transitions)

    def compute(self, discount: float) -> None:
        rewards = [t.reward for t in self.transitions]
        values = [t.value for t in self.transitions]
        self.returns = discounted_returns(rewards, discount)
        self.advantages = advantages(self.returns, values)

    def clear(self) -> None:
        self.transitions.clear()
        self.returns = None
        self.advantages = None


def discounted_returns(rewards, discount: float) -> np.ndarray:
    """G_t = r_t + discount * G_{t+1}, with G after the last reward = 0."""
    if not 0 < discount < 1:
        raise ValueError(f"discount must be in (0, 1), got {discount}")
    out = np.zeros(len(rewards))
    acc = 0.0
    for i in range(len(rewards) - 1, -1, -1):
        acc = rewards[i] + discount * acc
        out[i] = acc
    return out


def advantages(returns, values) -> np.ndarray:
    """Return-minus-baseline advantages, normalized over the batch.

    Normalization is skipped for a single sample or a (near-)zero spread,
    so degenerate buffers pass through unscaled.
    """
    g = np.asarray(returns, dtype=float)
    v = np.asarray(values, dtype=float)
    if g.shape != v.shape:
        raise ValueError(f"length mismatch: {g.shape} returns vs {v.shape} values")
    adv = g - v
    if adv.size < 2:
        return adv
    std = adv.std()
    if std < _NORM_EPS:
        return adv
    return (adv - adv.mean()) / std


def ppo_clip_objective(ratio: float, advantage: float, epsilon: float) -> float:
    """min(ratio * adv, clamp(ratio, 1 - eps, 1 + eps) * adv)."""
    if ratio <= 0:
        raise ValueError(f"probability ratio must be > 0, got {ratio}")
    if epsilon <= 0:
        raise ValueError(f"epsilon must be > 0, got {epsilon}")
    clipped = min(max(ratio, 1.0 - epsilon), 1.0 + epsilon)
    return min(ratio * advantage, clipped * advantage)


# --- batched losses with gradients ---------------------------------------


def actor_loss(net: Mlp, states, actions, old_logps, advs, masks,
               epsilon: float, entropy_weight: float) -> float:
    """Negated mean clipped surrogate minus entropy bonus (to minimize)."""
    loss, _, _ = _actor_terms(net, states, actions, old_logps, advs, masks,
                              epsilon, entropy_weight, want_grads=False)
    return loss


def actor_loss_and_grads(net: Mlp, states, actions, old_logps, advs, masks,
                         epsilon: float, entropy_weight: float):
    """Loss plus parameter gradients and the fraction of clipped ratios."""
    return _actor_terms(net, states, actions, old_logps, advs, masks,
                        epsilon, entropy_weight, want_grads=True)


def _actor_terms(net, states, actions, old_logps, advs, masks,
                 epsilon, entropy_weight, want_grads):
    x = np.asarray(states, dtype=float)
    actions = np.asarray(actions, dtype=int)
    old_logps = np.asarray(old_logps, dtype=float)
    advs = np.asarray(advs, dtype=float)
    n = x.shape[0]
    out, acts = net.forward_cache(x)
    dlogits = np.zeros_like(out) if want_grads else None
    total = 0.0
    clipped_count = 0
    for b in range(n):
        mask = np.asarray(masks[b], dtype=bool)
        logp = masked_log_softmax(out[b], mask)
        p = np.exp(logp)
        a = actions[b]
        ratio = float(np.exp(logp[a] - old_logps[b]))
        adv = advs[b]
        unclipped = ratio * adv
        clip_lo, clip_hi = 1.0 - epsilon, 1.0 + epsilon
        clipped = min(max(ratio, clip_lo), clip_hi) * adv
        surr = min(unclipped, clipped)
        if not clip_lo <= ratio <= clip_hi:
            clipped_count += 1
        ent = float(-(p[mask] * logp[mask]).sum())
        total += -surr - entropy_weight * ent
        if want_grads:
            # d(surr)/dlogp[a] is ratio*adv on the active unclipped branch,
            # zero when the clamp saturates and wins the min.
            coeff = unclipped if (clip_lo <= ratio <= clip_hi or unclipped <= clipped) else 0.0
            onehot = np.zeros_like(p)
            onehot[a] = 1.0
            dsurr = coeff * (onehot - p)
            dent = np.where(mask, -p * (np.where(mask, logp, 0.0) + ent), 0.0)
            dlogits[b] = np.where(mask, -dsurr - entropy_weight * dent, 0.0)
    loss = total / n
    if not want_grads:
        return loss, None, clipped_count / n
    grads = net.backward(acts, dlogits / n)
    return loss, grads, clipped_count / n


def critic_loss(net: Mlp, states, returns) -> float:
    """Mean squared error of the value head against the returns."""
    x = np.asarray(states, dtype=float)
    g = np.asarray(returns, dtype=float)
    v = net.logits(x)[:, 0]
    return float(np.mean((v - g) ** 2))


def critic_loss_and_grads(net: Mlp, states, returns):
    x = np.asarray(states, dtype=float)
    g = np.asarray(returns, dtype=float)
    out, acts = net.forward_cache(x)
    v = out[:, 0]
    err = v - g
    loss = float(np.mean(err ** 2))
    dout = np.zeros_like(out)
    dout[:, 0] = 2.0 * err / err.size
    return loss, net.backward(acts, dout)


def actor_step(net: Mlp, opt: Adam, states, actions, old_logps, advs, masks,
               config: TrainConfig) -> dict:
    """One clipped-surrogate ascent step; returns loss and clip fraction."""
    loss, grads, clip_frac = actor_loss_and_grads(
        net, states, actions, old_logps, advs, masks,
        config.clip_epsilon, config.entropy_weight,
    )
    clip_grad_norm(grads, config.grad_clip_norm)
    opt.step(net.params, grads)
    return {"loss": loss, "clip_fraction": clip_frac}


def critic_step(net: Mlp, opt: Adam, states, returns, config: TrainConfig) -> dict:
    loss, grads = critic_loss_and_grads(net, states, returns)
    clip_grad_norm(grads, config.grad_clip_norm)
    opt.step(net.params, grads)
    return {"loss": loss}
