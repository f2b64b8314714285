import numpy as np
import pytest

from stratrob import attacks, nn, training
from stratrob.attacks import AttackSpec
from stratrob.data import Dataset, synth_gaussian_groups
from stratrob.errors import ConfigError, DataError
from stratrob.training import Objective, TrainConfig
from stratrob.utilities import (
    SemanticPartition,
    UncertaintySet,
    adversarial_utility,
    one_hot_utility,
    row_candidates,
    zero_utility,
)

PART = SemanticPartition((0, 0, 1, 1))


@pytest.fixture(scope="module")
def blobs():
    return synth_gaussian_groups(4, 3, PART, 1.0, 4.0, 12, 0.3, seed=0)


def cfg(kind="clean", r=0.2, epochs=2, **kw):
    obj_kw = {k: kw.pop(k) for k in ("utility", "uset", "eps", "fallback") if k in kw}
    spec = AttackSpec(radius=r, steps=3, step_size=max(r, 1e-3) / 2, random_start=True)
    return TrainConfig(epochs=epochs, batch_size=8, base_lr=0.05, attack=spec,
                       objective=Objective(kind, **obj_kw), seed=kw.pop("seed", 1), **kw)


def same_params(a, b):
    return all(np.array_equal(p, q) for p, q in zip(a.params(), b.params()))


def net0():
    return nn.DenseNet.init([3, 5, 4], seed=0)


def test_clean_separable_blobs():
    rng = np.random.default_rng(0)
    X = np.vstack([rng.normal(-2, 0.3, (40, 2)), rng.normal(2, 0.3, (40, 2))])
    ds = Dataset(X, np.repeat([0, 1], 40), 2)
    net, log = training.train_clean(nn.DenseNet.init([2, 2], 0), ds,
                                    TrainConfig(epochs=50, batch_size=16, base_lr=0.05, seed=0))
    assert log.epochs[-1].accuracy >= 0.99
    assert np.mean(nn.predict(net, X) == ds.y) >= 0.99


def test_zero_epochs_and_determinism(blobs):
    n = net0()
    out, log = training.train_clean(n, blobs, cfg(epochs=0))
    assert same_params(out, n) and not log.epochs
    a, _ = training.train_adversarial(n, blobs, cfg("adversarial"))
    b, _ = training.train_adversarial(n, blobs, cfg("adversarial"))
    assert same_params(a, b)
    c, _ = training.train_adversarial(n, blobs, cfg("adversarial", seed=2))
    assert not same_params(a, c)


def test_radius_zero_collapses_to_clean(blobs):
    U = UncertaintySet.all_k_hot(4, 1)
    u = one_hot_utility([1, 0, 3, 2])
    clean, _ = training.train_clean(net0(), blobs, cfg(r=0.0))
    for kind, kw in [("adversarial", {}), ("strategic_single", {"utility": u}),
                     ("strategic_set", {"uset": U}), ("mixed", {"utility": u, "uset": U, "eps": 0.5}),
                     ("sequential", {"utility": u, "fallback": True})]:
        net, _ = training.train(net0(), blobs, cfg(kind, r=0.0, **kw))
        assert same_params(net, clean), kind


def test_zero_utility_is_clean(blobs):
    clean, _ = training.train_clean(net0(), blobs, cfg())
    net, log = training.train(net0(), blobs, cfg("strategic_single", utility=zero_utility(4)))
    assert same_params(net, clean) and log.noise_replacements == 0


def test_singleton_set_matches_single(blobs):
    u = one_hot_utility([1, 0, 3, 2])
    a, _ = training.train(net0(), blobs, cfg("strategic_single", utility=u))
    b, log = training.train(net0(), blobs, cfg("strategic_set", uset=UncertaintySet.singleton(u)))
    assert same_params(a, b) and log.path.startswith("representative")


def test_mixed_eps_zero_matches_single(blobs):
    u = one_hot_utility([1, 0, 3, 2])
    a, _ = training.train(net0(), blobs, cfg("strategic_single", utility=u))
    b, log = training.train(net0(), blobs, cfg("mixed", utility=u, uset=UncertaintySet.all_k_hot(4, 1), eps=0.0))
    assert same_params(a, b) and log.mixed_draws == 0


def test_sequential_single_target_matches_single(blobs):
    u = one_hot_utility([1, 0, 3, 2])
    a, _ = training.train(net0(), blobs, cfg("strategic_single", utility=u, noise_eps=0.0))
    b, _ = training.train(net0(), blobs, cfg("sequential", utility=u))
    assert same_params(a, b)


def test_response_call_counts():
    K = 10
    part = SemanticPartition(tuple([0] * 5 + [1] * 5))
    ds = synth_gaussian_groups(K, 10, part, 1.0, 4.0, 3, 0.3, seed=0)
    n = nn.DenseNet.init([10, K], 0)
    _, log = training.train(n, ds, cfg("strategic_set", epochs=1, uset=UncertaintySet.all_k_hot(K, 1)))
    assert log.response_calls == 9 * len(ds)
    assert log.path.startswith("enumerate")
    _, log = training.train(n, ds, cfg("strategic_set", epochs=1, uset=UncertaintySet.semantic(part)))
    assert log.response_calls == len(ds) and log.path == "representative:semantic"


def test_worst_candidate_selection(blobs):
    U = UncertaintySet.all_k_hot(4, 1)
    net, log = training.train_strategic_set(net0(), blobs, cfg("strategic_set", uset=U), record_selections=True)
    assert log.selections
    for losses, chosen in log.selections:
        for i, row in enumerate(losses):
            assert row[chosen[i]] >= row.max()
            assert chosen[i] == int(np.argmax(row))  # first maximal candidate


def test_selection_matches_direct_losses(blobs):
    net = net0()
    U = UncertaintySet.all_k_hot(4, 1)
    spec = AttackSpec(radius=0.3, steps=3, step_size=0.1)
    X, y = blobs.X[:6], blobs.y[:6]
    X_out, _, losses, chosen, calls = training.select_worst_candidates(net, X, y, U, spec)
    assert calls == 3 * 6
    for i in range(6):
        T = row_candidates(U, int(y[i]))[chosen[i]]
        d = attacks.strategic_response(net, X[i], int(y[i]), T, spec).delta
        np.testing.assert_allclose(X_out[i], X[i] + d)


def test_mixed_draw_frequency():
    rng = np.random.default_rng(0)
    u = one_hot_utility([1, 0, 3, 2])
    U = UncertaintySet.all_k_hot(4, 1)
    draws = [training.draw_batch_utility(u, U, 0.25, rng)[1] for _ in range(2000)]
    assert abs(np.mean(draws) - 0.25) < 0.02


def test_fallback_differs_only_on_failures(blobs):
    u = one_hot_utility([1, 0, 3, 2])
    spec = AttackSpec(radius=0.3, steps=3, step_size=0.1)
    X0, s0 = training.sequential_inputs(net0(), blobs.X, blobs.y, u, spec, fallback=False)
    X1, s1 = training.sequential_inputs(net0(), blobs.X, blobs.y, u, spec, fallback=True)
    assert np.array_equal(s0, s1) and (~s0).any()
    np.testing.assert_array_equal(X0[s0], X1[s0])
    assert not np.array_equal(X0[~s0], X1[~s0])


def test_lr_schedule():
    c = TrainConfig(epochs=10, base_lr=0.1, lr_drop_epochs=(3, 6))
    assert [c.lr_at(e) for e in (0, 3, 6, 9)] == [0.1, 0.1 * 0.1, 0.1 * 0.1 ** 2, 0.1 * 0.1 ** 2]
    with pytest.raises(ConfigError):
        TrainConfig(epochs=5, lr_drop_epochs=(3, 2))
    with pytest.raises(ConfigError):
        TrainConfig(epochs=5, lr_drop_epochs=(5,))


def test_noise_defaults():
    U = UncertaintySet.preference([(0, 1, 2), (2, 1, 0)])
    assert TrainConfig(objective=Objective("strategic_set", uset=U)).effective_noise_eps == 0.5
    assert TrainConfig().effective_noise_eps == 0.1


def test_validation(blobs):
    with pytest.raises(ConfigError):
        Objective("strategic_single")
    with pytest.raises(ConfigError):
        training.train(net0(), blobs, cfg("strategic_single", utility=adversarial_utility(3)))
    with pytest.raises(DataError):
        training.train_clean(nn.DenseNet.init([3, 5], 0), blobs, cfg())
    with pytest.raises(DataError):
        training.train_clean(net0(), blobs.subset(np.nonzero(blobs.y < 3)[0]), cfg())
