"""Hyperparameter sampling, architecture construction, parameter counting."""

import numpy as np
import pytest

from screwfdi.errors import ConfigurationError
from screwfdi.layers import Dense, Network
from screwfdi.models import (
    KINDS,
    CNN_FILTERS,
    LSTM_HIDDEN,
    POSITIONAL_CAPACITY,
    HyperParams,
    build_model,
    count_parameters,
    sample_hyperparams,
)
from screwfdi.seeding import TAG_INIT, derive_rng


def _dense_params(fan_in, units):
    return fan_in * units + units


def closed_form_count(hp, input_shape):
    """Independent per-layer arithmetic for the expected parameter total."""
    C, S = input_shape

    def fc_chain(features):
        total = 0
        for _ in range(hp.nl_fc):
            total += _dense_params(features, hp.nn_fc)
            features = hp.nn_fc
        return total + _dense_params(features, 3)

    def block_params(width):
        attention = 4 * (width * width + width)
        norms = 2 * (2 * width)
        ffn = _dense_params(width, 4 * width) + _dense_params(4 * width, width)
        return attention + norms + ffn

    if hp.kind == "MLP":
        return fc_chain(C * S)
    if hp.kind == "CNN":
        total, channels, steps = 0, C, S
        for _ in range(hp.nl_dn):
            total += hp.k_dn * channels * CNN_FILTERS + CNN_FILTERS
            channels = CNN_FILTERS
            steps = steps - hp.k_dn + 1
            if hp.pool_dn > 1:
                steps //= hp.pool_dn
            assert steps >= 1
        return total + fc_chain(channels * steps)
    if hp.kind == "LSTM":
        H = LSTM_HIDDEN
        total = 4 * H * (C + H + 1)
        total += (hp.nl_dn - 1) * 4 * H * (H + H + 1)
        return total + _dense_params(H, 3)
    if hp.kind == "Transformer":
        W = hp.nn_tr
        total = hp.k_dn * C * W + W
        total += POSITIONAL_CAPACITY * W
        total += hp.nl_dn * block_params(W)
        return total + _dense_params(W, 3)
    # ViT
    W = hp.nn_tr
    total = hp.k_dn * C * W + W
    total += POSITIONAL_CAPACITY * W
    total += hp.nl_dn * block_params(W)
    features = W
    for _ in range(hp.nl_fc):
        total += _dense_params(features, hp.nn_fc)
        features = hp.nn_fc
    return total + _dense_params(features, 3)


class TestSampling:
    def test_lstm_fixed_fields(self):
        for seed in range(50):
            hp = sample_hyperparams("LSTM", seed)
            assert hp.nl_fc == 1
            assert hp.nn_fc == 1
            assert hp.l2_fc is None
            assert 1 <= hp.nl_dn <= 5

    def test_mlp_ranges(self):
        lows = {"nl_fc": 99, "nn_fc": 99999}
        highs = {"nl_fc": -1, "nn_fc": -1}
        for seed in range(300):
            hp = sample_hyperparams("MLP", seed)
            assert 1 <= hp.nl_fc <= 10
            assert 1 <= hp.nn_fc <= 2048
            assert hp.nl_dn is None and hp.k_dn is None
            lows["nl_fc"] = min(lows["nl_fc"], hp.nl_fc)
            highs["nl_fc"] = max(highs["nl_fc"], hp.nl_fc)
            lows["nn_fc"] = min(lows["nn_fc"], hp.nn_fc)
            highs["nn_fc"] = max(highs["nn_fc"], hp.nn_fc)
        # The sampler actually explores the range ends.
        assert lows["nl_fc"] == 1 and highs["nl_fc"] == 10
        assert lows["nn_fc"] < 150 and highs["nn_fc"] > 1850

    def test_dropout_always_below_half(self):
        draws = [
            sample_hyperparams(kind, seed).drop_fc
            for kind in KINDS
            for seed in range(200)
        ]
        assert len(draws) == 1000
        assert min(draws) >= 0.0
        assert max(draws) < 0.5

    def test_l2_log_uniform_range(self):
        draws = np.array(
            [sample_hyperparams("MLP", s).l2_fc for s in range(400)]
        )
        assert draws.min() >= 1e-3
        assert draws.max() <= 0.1
        # Log-uniform: mass well spread over the decades.
        assert np.quantile(draws, 0.1) < 3e-3
        assert np.quantile(draws, 0.9) > 3e-2

    def test_transformer_and_vit_widths(self):
        for kind in ("Transformer", "ViT"):
            widths = {sample_hyperparams(kind, s).nn_tr for s in range(200)}
            assert widths == {16, 32, 64, 128, 256}

    def test_determinism(self):
        for kind in KINDS:
            assert sample_hyperparams(kind, 7) == sample_hyperparams(kind, 7)
        assert sample_hyperparams("CNN", 1) != sample_hyperparams("CNN", 2)

    def test_round_trip_serialization(self):
        for kind in KINDS:
            hp = sample_hyperparams(kind, 11)
            assert HyperParams.from_dict(hp.to_dict()) == hp

    def test_invalid_configurations_rejected(self):
        with pytest.raises(ConfigurationError):
            HyperParams(kind="Quantum").validate()
        with pytest.raises(ConfigurationError, match="does not apply"):
            HyperParams(
                kind="MLP", nl_fc=1, nn_fc=8, drop_fc=0.1, l2_fc=0.01, nl_dn=2
            ).validate()
        with pytest.raises(ConfigurationError, match="k_dn"):
            HyperParams(
                kind="CNN",
                nl_fc=1,
                nn_fc=8,
                drop_fc=0.1,
                l2_fc=0.01,
                nl_dn=1,
                k_dn=2,
                pool_dn=1,
            ).validate()
        with pytest.raises(ConfigurationError, match="fixed"):
            HyperParams(
                kind="ViT",
                nl_fc=1,
                nn_fc=64,
                drop_fc=0.1,
                nl_dn=4,
                k_dn=2,
                pool_dn=2,
                nn_tr=32,
            ).validate()
        with pytest.raises(ConfigurationError, match="nn_tr"):
            HyperParams(
                kind="Transformer",
                nl_fc=1,
                nn_fc=64,
                drop_fc=0.1,
                nl_dn=1,
                k_dn=8,
                nn_tr=100,
            ).validate()
        with pytest.raises(ConfigurationError, match="unknown"):
            HyperParams.from_dict({"kind": "MLP", "warp": 9})


def _tiny_hp(kind):
    """A small, always-buildable configuration per kind."""
    return {
        "MLP": HyperParams("MLP", nl_fc=2, nn_fc=16, drop_fc=0.2, l2_fc=0.01),
        "CNN": HyperParams(
            "CNN",
            nl_fc=1,
            nn_fc=12,
            drop_fc=0.1,
            l2_fc=0.01,
            nl_dn=2,
            k_dn=3,
            pool_dn=2,
        ),
        "LSTM": HyperParams("LSTM", nl_fc=1, nn_fc=1, drop_fc=0.1, nl_dn=2),
        "Transformer": HyperParams(
            "Transformer",
            nl_fc=1,
            nn_fc=64,
            drop_fc=0.1,
            nl_dn=1,
            k_dn=8,
            nn_tr=16,
        ),
        "ViT": HyperParams(
            "ViT",
            nl_fc=1,
            nn_fc=64,
            drop_fc=0.1,
            nl_dn=5,
            k_dn=2,
            pool_dn=2,
            nn_tr=16,
        ),
    }[kind]


class TestBuild:
    @pytest.mark.parametrize("kind", KINDS)
    def test_forward_shape_and_finiteness(self, kind):
        model = build_model(_tiny_hp(kind), (8, 32))
        x = np.random.default_rng(0).standard_normal((4, 8, 32))
        logits = model.forward(x)
        assert logits.data.shape == (4, 3)
        assert np.isfinite(logits.data).all()
        labels = model.predict(x)
        assert labels.shape == (4,)
        assert set(labels.tolist()) <= {0, 1, 2}

    def test_build_determinism(self):
        for kind in KINDS:
            a = build_model(_tiny_hp(kind), (8, 32), derive_rng(5, TAG_INIT))
            b = build_model(_tiny_hp(kind), (8, 32), derive_rng(5, TAG_INIT))
            for (name_a, pa), (name_b, pb) in zip(a.parameters(), b.parameters()):
                assert name_a == name_b
                assert np.array_equal(pa.data, pb.data)

    def test_cnn_pooling_collapse_is_typed_error(self):
        hp = HyperParams(
            "CNN",
            nl_fc=1,
            nn_fc=4,
            drop_fc=0.0,
            l2_fc=0.01,
            nl_dn=8,
            k_dn=5,
            pool_dn=2,
        )
        with pytest.raises(ConfigurationError):
            build_model(hp, (8, 8))

    def test_dense_alone_counts_nine(self):
        net = Network([Dense(3, activation=None)], (2,), derive_rng(0, TAG_INIT))
        assert net.parameter_count() == 9

    def test_mlp_hand_count(self):
        hp = HyperParams("MLP", nl_fc=1, nn_fc=100, drop_fc=0.0, l2_fc=0.01)
        model = build_model(hp, (6, 64))
        assert count_parameters(model) == 38_803

    def test_lstm_cell_count(self):
        hp = HyperParams("LSTM", nl_fc=1, nn_fc=1, drop_fc=0.0, nl_dn=1)
        model = build_model(hp, (6, 20))
        # Four-gate cell 4*((6+8)*8+8) = 480, plus the 8->3 head.
        assert count_parameters(model) == 480 + 27

    @pytest.mark.parametrize("kind", KINDS)
    def test_closed_form_counts(self, kind):
        for seed in range(12):
            hp = sample_hyperparams(kind, seed)
            try:
                model = build_model(hp, (8, 64))
            except ConfigurationError:
                continue
            assert count_parameters(model) == closed_form_count(hp, (8, 64))

    def test_sequence_models_accept_other_lengths(self):
        rng = np.random.default_rng(1)
        lstm = build_model(_tiny_hp("LSTM"), (8, 32))
        for steps in (8, 32, 48):
            assert lstm.predict(rng.standard_normal((2, 8, steps))).shape == (2,)
        transformer = build_model(_tiny_hp("Transformer"), (8, 32))
        for steps in (8, 24, 64):
            assert transformer.predict(
                rng.standard_normal((2, 8, steps))
            ).shape == (2,)
        with pytest.raises(ConfigurationError, match="patch"):
            transformer.predict(rng.standard_normal((2, 8, 7)))

    @pytest.mark.parametrize("kind", ["MLP", "CNN", "ViT"])
    def test_fixed_length_models_reject_other_lengths(self, kind):
        model = build_model(_tiny_hp(kind), (8, 32))
        x = np.random.default_rng(2).standard_normal((2, 8, 31))
        with pytest.raises(ConfigurationError, match="length"):
            model.predict(x)

    def test_channel_mismatch_rejected(self):
        model = build_model(_tiny_hp("MLP"), (8, 32))
        with pytest.raises(ConfigurationError, match="channels"):
            model.predict(np.zeros((2, 6, 32)))
        with pytest.raises(ConfigurationError, match="batch"):
            model.predict(np.zeros((8, 32)))

    def test_bad_input_shape_rejected(self):
        with pytest.raises(ConfigurationError):
            build_model(_tiny_hp("MLP"), (8,))
        with pytest.raises(ConfigurationError):
            build_model(_tiny_hp("MLP"), (8, 0))


class TestFuzz:
    @pytest.mark.parametrize("kind", KINDS)
    def test_thousand_samples_validate(self, kind):
        for seed in range(1000):
            sample_hyperparams(kind, seed).validate()

    @pytest.mark.parametrize("kind", KINDS)
    def test_sampled_configs_build_or_raise_typed(self, kind):
        rng = np.random.default_rng(3)
        x = rng.standard_normal((2, 8, 32))
        for seed in range(25):
            hp = sample_hyperparams(kind, seed)
            try:
                model = build_model(hp, (8, 32), derive_rng(seed, TAG_INIT))
            except ConfigurationError:
                continue  # e.g. convolutions that consume the sequence
            logits = model.forward(x)
            assert logits.data.shape == (2, 3)
            assert np.isfinite(logits.data).all()
