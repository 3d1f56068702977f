import json

import numpy as np
import pytest

from aggloss.datasets import LabeledDataset
from aggloss.losses import HINGE, LOGISTIC, average_spec, close_k_spec
from aggloss.models import (
    LinearModel,
    ModelError,
    ResidualMlpModel,
    init_model,
    load_model,
    save_model,
    weight_norm_sq,
)
from aggloss.training import aggregate_parameter_gradient


def random_mlp(d, seed=0):
    return ResidualMlpModel.init(d, np.random.default_rng(seed))


def random_mlp_off_kinks(d, x, seed):
    """MLP with random nonzero biases whose hidden pre-activations stay a
    safe distance from the relu kinks at the probe input(s); finite
    differences are only meaningful away from the kinks."""
    rng = np.random.default_rng(seed)
    X = np.atleast_2d(x)
    for _ in range(200):
        base = ResidualMlpModel.init(d, rng)
        model = ResidualMlpModel(base.W1, rng.normal(0, 0.5, d), base.W2,
                                 rng.normal(0, 0.5, d), base.w_out,
                                 float(rng.normal(0, 0.5)))
        z1 = X @ model.W1.T + model.b1
        h1 = np.maximum(0.0, z1)
        z2 = h1 @ model.W2.T + model.b2
        if min(np.abs(z1).min(), np.abs(z2).min()) > 1e-3:
            return model
    raise AssertionError("could not find a kink-free probe model")


class TestForward:
    def test_zero_linear_model(self):
        m = LinearModel.zeros(3)
        assert m.forward([1.0, 2.0, 3.0]) == 0.0

    def test_linear_dot_product(self):
        m = LinearModel(np.array([1.0, -1.0]), 0.5)
        assert m.forward([2.0, 1.0]) == pytest.approx(1.5)

    def test_mlp_zero_weights_zero_score(self):
        d = 4
        zero = ResidualMlpModel(np.zeros((d, d)), np.zeros(d),
                                np.zeros((d, d)), np.zeros(d),
                                np.zeros(d), 0.0)
        assert zero.forward(np.ones(d)) == 0.0

    def test_dimension_mismatch(self):
        with pytest.raises(ModelError):
            LinearModel.zeros(3).forward([1.0, 2.0])
        with pytest.raises(ModelError):
            random_mlp(3).forward_batch(np.ones((5, 4)))

    def test_batch_matches_single(self):
        rng = np.random.default_rng(1)
        X = rng.normal(0, 1, (10, 4))
        for model in (LinearModel(rng.normal(0, 1, 4), 0.3), random_mlp(4, 2)):
            batch = model.forward_batch(X)
            singles = [model.forward(x) for x in X]
            assert batch == pytest.approx(singles)


class TestBackward:
    def test_linear_unit_upstream(self):
        m = LinearModel(np.array([2.0, 3.0]), 1.0)
        x = np.array([0.5, -1.5])
        g = m.backward(x, 1.0)
        assert g["weights"] == pytest.approx(x)
        assert g["bias"] == 1.0

    def test_linear_in_upstream(self):
        m = LinearModel(np.array([2.0, 3.0]), 1.0)
        x = np.array([0.5, -1.5])
        g1 = m.backward(x, 1.0)
        gc = m.backward(x, -2.5)
        assert gc["weights"] == pytest.approx(-2.5 * g1["weights"])
        assert gc["bias"] == pytest.approx(-2.5 * g1["bias"])

    def test_batch_backward_sums_singles(self):
        rng = np.random.default_rng(3)
        X = rng.normal(0, 1, (6, 3))
        up = rng.normal(0, 1, 6)
        for model in (LinearModel(rng.normal(0, 1, 3), 0.1), random_mlp(3, 4)):
            batch = model.backward_batch(X, up)
            acc = model.zero_grads()
            for x, u in zip(X, up):
                single = model.backward(x, float(u))
                for key in acc:
                    acc[key] = acc[key] + single[key]
            for key in acc:
                assert batch[key] == pytest.approx(acc[key], abs=1e-12)

    def test_mlp_matches_finite_differences(self):
        # every parameter gradient of (upstream * score) vs central differences
        rng = np.random.default_rng(5)
        h = 1e-5
        for trial in range(20):
            d = int(rng.integers(2, 5))
            x = rng.normal(0, 1, d)
            model = random_mlp_off_kinks(d, x, seed=100 + trial)
            up = float(rng.normal(0, 1))
            grads = model.backward(x, up)
            arrays = model.to_dict()
            for key in arrays:
                arr = np.atleast_1d(np.asarray(arrays[key], dtype=float))
                flat_grad = np.atleast_1d(np.asarray(grads[key])).ravel()
                for idx in range(arr.size):
                    def score_at(delta, key=key, idx=idx):
                        doc = {k: np.array(v, dtype=float)
                               for k, v in model.to_dict().items()}
                        pert = np.atleast_1d(doc[key]).ravel()
                        pert[idx] += delta
                        m2 = ResidualMlpModel(
                            W1=doc["W1"], b1=doc["b1"], W2=doc["W2"],
                            b2=doc["b2"], w_out=doc["w_out"],
                            b_out=float(np.atleast_1d(doc["b_out"])[0]),
                        )
                        return up * m2.forward(x)

                    fd = (score_at(h) - score_at(-h)) / (2 * h)
                    got = flat_grad[idx]
                    assert got == pytest.approx(fd, abs=1e-6, rel=1e-4)


class TestApplyUpdate:
    def test_zero_grads_zero_lambda_fixed_point(self):
        m = LinearModel(np.array([1.0, -2.0]), 0.7)
        m2 = m.apply_update(m.zero_grads(), step=0.5, lam=0.0)
        assert m2.weights == pytest.approx(m.weights)
        assert m2.bias == m.bias

    def test_pure_decay(self):
        m = LinearModel(np.array([1.0]), 0.0)
        m2 = m.apply_update({"weights": np.zeros(1), "bias": 0.0},
                            step=1.0, lam=0.5)
        assert m2.weights == pytest.approx([0.0])

    def test_bias_never_decayed(self):
        m = LinearModel(np.array([1.0]), 5.0)
        m2 = m.apply_update({"weights": np.zeros(1), "bias": 0.0},
                            step=1.0, lam=10.0)
        assert m2.bias == 5.0
        mlp = random_mlp(3, 9)
        mlp2 = mlp.apply_update(mlp.zero_grads(), step=1.0, lam=0.2)
        assert mlp2.b1 == pytest.approx(mlp.b1)
        assert mlp2.b2 == pytest.approx(mlp.b2)
        assert mlp2.b_out == mlp.b_out

    def test_nonfinite_update_rejected(self):
        m = LinearModel(np.array([1.0]), 0.0)
        with pytest.raises(ModelError):
            m.apply_update({"weights": np.array([np.inf]), "bias": 0.0},
                           step=1.0, lam=0.0)


class TestResidualIdentity:
    def test_zeroed_hidden_layers_reproduce_linear(self):
        rng = np.random.default_rng(11)
        d = 5
        w_out = rng.normal(0, 1, d)
        b_out = 0.37
        mlp = ResidualMlpModel(np.zeros((d, d)), np.zeros(d),
                               np.zeros((d, d)), np.zeros(d), w_out, b_out)
        lin = LinearModel(w_out, b_out)
        X = rng.normal(0, 1, (50, d))
        assert mlp.forward_batch(X) == pytest.approx(lin.forward_batch(X))


class TestChainedGradients:
    @pytest.mark.parametrize("loss", [LOGISTIC, HINGE])
    @pytest.mark.parametrize("family", ["linear", "mlp"])
    def test_average_aggregate_matches_finite_differences(self, loss, family):
        rng = np.random.default_rng(13)
        d = 3
        for trial in range(10):
            X = rng.normal(0, 1, (8, d))
            y = rng.choice([-1.0, 1.0], 8)
            if family == "linear":
                model = LinearModel(rng.normal(0, 1, d), float(rng.normal()))
            else:
                model = random_mlp_off_kinks(d, X, seed=(17, trial))
            if loss is HINGE:
                margins = y * model.forward_batch(X)
                if np.any(np.abs(1.0 - margins) < 1e-3):
                    continue  # hinge kink too close for finite differences
            data = LabeledDataset(X, y)
            grads, _ = aggregate_parameter_gradient(model, data, loss,
                                                    average_spec())
            h = 1e-5

            def objective(m):
                scores = m.forward_batch(X)
                return float(np.mean(loss.value(y, scores)))

            for key, g in grads.items():
                g = np.atleast_1d(np.asarray(g, dtype=float)).ravel()
                for idx in range(g.size):
                    def perturbed(delta, key=key, idx=idx):
                        doc = {k: np.array(v, dtype=float)
                               for k, v in model.to_dict().items()}
                        np.atleast_1d(doc[key]).ravel()[idx] += delta
                        if family == "linear":
                            return LinearModel(doc["weights"],
                                               float(doc["bias"]))
                        return ResidualMlpModel(
                            doc["W1"], doc["b1"], doc["W2"], doc["b2"],
                            doc["w_out"], float(doc["b_out"]))

                    fd = (objective(perturbed(h)) - objective(perturbed(-h))) / (2 * h)
                    assert g[idx] == pytest.approx(fd, abs=2e-6, rel=1e-4)


class TestSerialization:
    def test_linear_round_trip(self, tmp_path):
        m = LinearModel(np.array([0.5, -1.5]), 2.0)
        path = tmp_path / "lin.json"
        save_model(m, path)
        doc = json.loads(path.read_text())
        assert set(doc) == {"weights", "bias"}
        m2 = load_model(path)
        assert isinstance(m2, LinearModel)
        assert m2.weights == pytest.approx(m.weights)
        assert m2.bias == m.bias

    def test_mlp_round_trip(self, tmp_path):
        m = random_mlp(3, 21)
        path = tmp_path / "mlp.json"
        save_model(m, path)
        doc = json.loads(path.read_text())
        assert set(doc) == {"W1", "b1", "W2", "b2", "w_out", "b_out"}
        m2 = load_model(path)
        X = np.random.default_rng(0).normal(0, 1, (5, 3))
        assert m2.forward_batch(X) == pytest.approx(m.forward_batch(X))


def test_weight_norm_excludes_biases():
    m = LinearModel(np.array([3.0, 4.0]), 100.0)
    assert weight_norm_sq(m) == pytest.approx(25.0)


def test_init_model_families():
    assert isinstance(init_model("linear", 4, 0), LinearModel)
    mlp = init_model("mlp", 4, 0)
    assert isinstance(mlp, ResidualMlpModel)
    # deterministic in the seed
    mlp2 = init_model("mlp", 4, 0)
    assert mlp.W1 == pytest.approx(mlp2.W1)
    with pytest.raises(ModelError):
        init_model("forest", 4, 0)
