"""Returns, advantages, and the clipped-surrogate update."""
import numpy as np
import pytest
from hypothesis import given, strategies as st

from spotsched.nets import Adam, Mlp, forward, masked_log_softmax
from spotsched.ppo import (
    TrainConfig,
    actor_loss,
    actor_loss_and_grads,
    actor_step,
    advantages,
    critic_loss,
    critic_loss_and_grads,
    critic_step,
    discounted_returns,
    ppo_clip_objective,
)


def test_train_config_defaults():
    cfg = TrainConfig()
    assert cfg.episodes == 300
    assert cfg.epochs == 4 and cfg.minibatch_size == 64
    assert cfg.clip_epsilon == 0.2
    assert 0 < cfg.discount < 1


def test_train_config_validation():
    for bad in (
        dict(discount=0),
        dict(discount=1),
        dict(clip_epsilon=0),
        dict(epochs=0),
        dict(minibatch_size=0),
        dict(episodes=0),
        dict(group_lr=0),
        dict(entropy_weight=-1),
        dict(grad_clip_norm=-1),
    ):
        with pytest.raises(ValueError):
            TrainConfig(**bad)


def test_discounted_returns_hand_case():
    out = discounted_returns([1.0, 1.0, 1.0], 0.5)
    assert out.tolist() == [1.75, 1.5, 1.0]
    with pytest.raises(ValueError):
        discounted_returns([1.0], 0.0)
    with pytest.raises(ValueError):
        discounted_returns([1.0], 1.0)


@given(
    st.lists(st.floats(-10, 10), min_size=1, max_size=30),
    st.floats(0.05, 0.99),
)
def test_discounted_returns_recursion(rewards, discount):
    out = discounted_returns(rewards, discount)
    assert out[-1] == rewards[-1]
    for t in range(len(rewards) - 1):
        assert out[t] == pytest.approx(rewards[t] + discount * out[t + 1], rel=1e-12, abs=1e-12)


def test_advantages_normalized():
    adv = advantages([1.0, 2.0, 3.0, 4.0], [0.0, 0.0, 0.0, 0.0])
    assert adv.mean() == pytest.approx(0.0, abs=1e-12)
    assert adv.std() == pytest.approx(1.0, rel=1e-12)


def test_advantages_degenerate_passthrough():
    assert advantages([5.0], [2.0]).tolist() == [3.0]
    assert advantages([2.0, 2.0], [1.0, 1.0]).tolist() == [1.0, 1.0]
    with pytest.raises(ValueError):
        advantages([1.0], [1.0, 2.0])


def test_ppo_clip_objective_cases():
    assert ppo_clip_objective(1.5, 1.0, 0.2) == 1.2
    assert ppo_clip_objective(0.5, -1.0, 0.2) == -0.8
    for adv in (-2.0, 0.0, 0.7):
        assert ppo_clip_objective(1.0, adv, 0.2) == adv
        assert ppo_clip_objective(1.0, adv, 0.05) == adv
    with pytest.raises(ValueError):
        ppo_clip_objective(0.0, 1.0, 0.2)
    with pytest.raises(ValueError):
        ppo_clip_objective(-1.0, 1.0, 0.2)
    with pytest.raises(ValueError):
        ppo_clip_objective(1.0, 1.0, 0.0)


@given(st.floats(0.01, 5), st.floats(-3, 3), st.floats(0.01, 0.5))
def test_ppo_clip_objective_is_a_lower_bound(ratio, adv, eps):
    val = ppo_clip_objective(ratio, adv, eps)
    assert val <= ratio * adv + 1e-12
    clipped = min(max(ratio, 1 - eps), 1 + eps) * adv
    assert val <= clipped + 1e-12


def _toy_batch(seed=0, n=6, dim=5, actions=4):
    rng = np.random.default_rng(seed)
    net = Mlp([dim, 8, actions], rng, policy_head=True)
    states = rng.normal(size=(n, dim))
    acted = rng.integers(actions, size=n)
    masks = np.ones((n, actions), dtype=bool)
    masks[0, 1] = False  # keep one masked entry in play
    if acted[0] == 1:
        acted[0] = 0
    advs = rng.normal(size=n)
    return net, states, acted, masks, advs


def _live_logps(net, states, actions, masks):
    out = net.logits(states)
    return np.array([
        masked_log_softmax(out[b], masks[b])[actions[b]] for b in range(len(actions))
    ])


def test_unit_ratio_reduces_to_vanilla_policy_gradient():
    net, states, actions, masks, advs = _toy_batch()
    old = _live_logps(net, states, actions, masks)
    loss, grads, clip_frac = actor_loss_and_grads(
        net, states, actions, old, advs, masks, epsilon=0.2, entropy_weight=0.0
    )
    assert clip_frac == 0.0
    assert loss == pytest.approx(-advs.mean())
    # by hand: gradient of -mean(adv * logp[action]) wrt the logits
    out, acts = net.forward_cache(states)
    dlog = np.zeros_like(out)
    for b in range(len(actions)):
        p = np.exp(masked_log_softmax(out[b], masks[b]))
        onehot = np.zeros_like(p)
        onehot[actions[b]] = 1.0
        dlog[b] = np.where(masks[b], -advs[b] * (onehot - p), 0.0)
    expected = net.backward(acts, dlog / len(actions))
    for g, e in zip(grads, expected):
        assert np.allclose(g, e, atol=1e-12)


def test_clip_fraction_counts_out_of_range_ratios():
    net, states, actions, masks, advs = _toy_batch(seed=1)
    old = _live_logps(net, states, actions, masks)
    old[0] -= 1.0  # ratio e^-1, below the clip window
    old[1] += 1.0  # ratio e^1, above it
    _, _, clip_frac = actor_loss_and_grads(
        net, states, actions, old, advs, masks, epsilon=0.2, entropy_weight=0.0
    )
    assert clip_frac == pytest.approx(2 / len(actions))


def test_zero_advantages_zero_entropy_gives_zero_grads():
    net, states, actions, masks, _ = _toy_batch(seed=2)
    old = _live_logps(net, states, actions, masks)
    _, grads, _ = actor_loss_and_grads(
        net, states, actions, old, np.zeros(len(actions)), masks,
        epsilon=0.2, entropy_weight=0.0,
    )
    assert all((g == 0.0).all() for g in grads)


def test_actor_loss_matches_grad_variant():
    net, states, actions, masks, advs = _toy_batch(seed=3)
    old = _live_logps(net, states, actions, masks) - 0.1
    args = (net, states, actions, old, advs, masks)
    assert actor_loss(*args, 0.2, 0.01) == actor_loss_and_grads(*args, 0.2, 0.01)[0]


def test_critic_loss_is_mse():
    rng = np.random.default_rng(5)
    net = Mlp([4, 6, 1], rng)
    states = rng.normal(size=(7, 4))
    returns = rng.normal(size=7)
    v = net.logits(states)[:, 0]
    assert critic_loss(net, states, returns) == pytest.approx(float(np.mean((v - returns) ** 2)))
    loss, grads = critic_loss_and_grads(net, states, returns)
    assert loss == critic_loss(net, states, returns)
    assert len(grads) == len(net.params)


def test_critic_step_reduces_loss():
    rng = np.random.default_rng(6)
    net = Mlp([4, 8, 1], rng)
    opt = Adam(net.params, lr=1e-2)
    states = rng.normal(size=(16, 4))
    returns = rng.normal(size=16)
    cfg = TrainConfig()
    start = critic_loss(net, states, returns)
    for _ in range(60):
        report = critic_step(net, opt, states, returns, cfg)
    assert critic_loss(net, states, returns) < start
    assert set(report) == {"loss"}
    assert opt.t == 60


def test_actor_step_raises_probability_of_good_action():
    rng = np.random.default_rng(7)
    net = Mlp([3, 8, 3], rng, policy_head=True)
    opt = Adam(net.params, lr=1e-2)
    state = np.zeros((1, 3))
    mask = np.ones((1, 3), dtype=bool)
    cfg = TrainConfig()
    before = forward(net, state[0], mask[0])[2]
    for _ in range(40):
        old = _live_logps(net, state, [2], mask)
        report = actor_step(net, opt, state, [2], old, np.array([1.0]), mask, cfg)
    after = forward(net, state[0], mask[0])[2]
    assert after > before
    assert set(report) == {"loss", "clip_fraction"}
