import math

import numpy as np
import pytest
import torch

from beamsim.learner.gradcheck import backward_with_diagnostics, finite_difference_check
from beamsim.learner.losses import beam_loss, position_loss, total_loss
from beamsim.learner.nets import (
    AutoFusion,
    FusionModel,
    GanFusion,
    ModelConfig,
    build_model,
    discriminator_loss,
    ganfusion_step,
    generator_loss,
    predict,
    reconstruction_loss,
)

SMALL = dict(input_shape=(8, 8), feature_dim=8, fine_beam_count=4)


def small_config(**overrides):
    return ModelConfig(**{**SMALL, **overrides})


class TestModelConfig:
    def test_rejects_unknown_tags(self):
        from beamsim.errors import ConfigError

        with pytest.raises(ConfigError):
            ModelConfig(backbone="vgg")
        with pytest.raises(ConfigError):
            ModelConfig(fusion="mixup")

    def test_rejects_task_weight_overrun(self):
        from beamsim.errors import ConfigError

        with pytest.raises(ConfigError):
            ModelConfig(lambda_pos=0.5, lambda_bm=0.6)

    def test_rejects_negative_weights(self):
        from beamsim.errors import ConfigError

        with pytest.raises(ConfigError):
            ModelConfig(lambda_adv=-0.1)


class TestBranches:
    def test_zero_input_zero_bias_gives_zero_feature(self):
        model = build_model(small_config(fusion="concat"), seed=0)
        with torch.no_grad():
            for layer in model.beam_branch.net:
                if isinstance(layer, torch.nn.Linear):
                    layer.bias.zero_()
        x = torch.zeros(2, 8, 8, dtype=torch.float64)
        assert torch.all(model.beam_branch(x) == 0)

    def test_seeded_init_reproducible(self):
        x = torch.randn(3, 8, 8, dtype=torch.float64)
        a = build_model(small_config(), seed=4)(x)
        b = build_model(small_config(), seed=4)(x)
        assert torch.equal(a.sector_logits, b.sector_logits)

    def test_hand_constructed_sum_reduction(self):
        # single effective layer: output = sum of inputs
        cfg = small_config(feature_dim=1, fusion="concat")
        model = build_model(cfg, seed=0)
        with torch.no_grad():
            layers = [l for l in model.beam_branch.net if isinstance(l, torch.nn.Linear)]
            for layer in layers:
                layer.bias.zero_()
            layers[0].weight.zero_()
            layers[0].weight[0, :] = 1.0  # unit 0 accumulates the input sum
            layers[1].weight.zero_()
            layers[1].weight[0, 0] = 1.0
            layers[2].weight.zero_()
            layers[2].weight[0, 0] = 1.0
        x = torch.rand(2, 8, 8, dtype=torch.float64)  # positive, so ReLU is transparent
        out = model.beam_branch(x)
        torch.testing.assert_close(out[:, 0], x.sum(dim=(1, 2)))

    def test_conv_lite_forward_shape(self):
        cfg = small_config(backbone="conv-lite", regnet_w_a=8.0, regnet_w_0=8, regnet_w_m=2.0, regnet_depth=4)
        model = build_model(cfg, seed=1)
        out = model(torch.randn(2, 8, 8, dtype=torch.float64))
        assert out.sector_logits.shape == (3, 2, 4)


class TestAutoFusion:
    def test_reconstruction_loss_closed_forms(self):
        x = torch.randn(1, 16, dtype=torch.float64)
        assert float(reconstruction_loss(x, x)) == 0.0
        offset = torch.zeros_like(x)
        offset[0, 3] = 1.0
        assert float(reconstruction_loss(x + offset, x)) == pytest.approx(1.0)

    def test_j_auto_matches_scalar_oracle(self):
        torch.manual_seed(0)
        module = AutoFusion(16).double()
        f_cat = torch.randn(5, 16, dtype=torch.float64)
        fused, j_auto = module(f_cat)
        with torch.no_grad():
            f_gen = module.gen(module.basic(f_cat))
        oracle = 0.0
        for i in range(5):
            oracle += sum(float(f_gen[i, j] - f_cat[i, j]) ** 2 for j in range(16))
        assert float(j_auto) == pytest.approx(oracle / 5, rel=1e-12)

    def test_latent_dim_is_half(self):
        module = AutoFusion(128)
        assert module.basic[0].out_features == 64
        assert module.gen[0].out_features == 64

    def test_fused_shape(self):
        module = AutoFusion(16).double()
        fused, _ = module(torch.randn(3, 16, dtype=torch.float64))
        assert fused.shape == (3, 16)


class TestGanFusion:
    def test_layer_dimensions(self):
        module = GanFusion(16)
        gen_linears = [l for l in module.generator if isinstance(l, torch.nn.Linear)]
        assert [(l.in_features, l.out_features) for l in gen_linears] == [(16, 32), (32, 32), (32, 16)]
        disc_linears = [l for l in module.discriminator if isinstance(l, torch.nn.Linear)]
        assert [(l.in_features, l.out_features) for l in disc_linears] == [(16, 16), (16, 16), (16, 1)]

    def test_uninformative_discriminator_loss(self):
        torch.manual_seed(1)
        module = GanFusion(16, disc_norm="none").double()
        with torch.no_grad():
            module.discriminator[-2].weight.zero_()
            module.discriminator[-2].bias.zero_()  # sigmoid(0) = 0.5 everywhere
        f_beam = torch.randn(4, 8, dtype=torch.float64)
        f_pos = torch.randn(4, 8, dtype=torch.float64)
        _, losses = ganfusion_step(module, f_beam, f_pos, mode="discriminator")
        assert float(losses["j_d"]) == pytest.approx(2.0 * math.log(2.0), abs=1e-12)

    def test_perfect_generator_drives_j_g_to_zero(self):
        torch.manual_seed(2)
        module = GanFusion(16, disc_norm="none").double()
        with torch.no_grad():
            module.discriminator[-2].weight.zero_()
            module.discriminator[-2].bias.fill_(60.0)  # sigmoid -> 1
        f_beam = torch.randn(4, 8, dtype=torch.float64)
        f_pos = torch.randn(4, 8, dtype=torch.float64)
        _, losses = ganfusion_step(module, f_beam, f_pos, mode="generator")
        assert float(losses["j_adv"]) == pytest.approx(0.0, abs=1e-12)

    def test_losses_match_scalar_oracle(self):
        torch.manual_seed(3)
        module = GanFusion(8, disc_norm="none").double()
        f_beam = torch.randn(6, 4, dtype=torch.float64)
        f_pos = torch.randn(6, 4, dtype=torch.float64)
        _, d_losses = ganfusion_step(module, f_beam, f_pos, mode="discriminator")
        _, g_losses = ganfusion_step(module, f_beam, f_pos, mode="generator")
        with torch.no_grad():
            f_enh, _ = module.enhancer(torch.cat([f_pos, f_pos], dim=-1))
            f_gen = module.generator(torch.cat([f_beam, f_beam], dim=-1))
            d_real = module.discriminate(f_enh)
            d_fake = module.discriminate(f_gen)
        j_d = -(sum(math.log(v) for v in d_real.tolist()) / 6 + sum(math.log(1 - v) for v in d_fake.tolist()) / 6)
        j_g = -sum(math.log(v) for v in d_fake.tolist()) / 6
        assert float(d_losses["j_d"]) == pytest.approx(j_d, rel=1e-12)
        assert float(g_losses["j_adv"]) == pytest.approx(j_g, rel=1e-12)

    def test_discriminator_output_in_unit_interval(self):
        torch.manual_seed(4)
        module = GanFusion(8).double()
        module.eval()
        probs = module.discriminate(torch.randn(32, 8, dtype=torch.float64))
        assert torch.all(probs > 0) and torch.all(probs < 1)

    def test_bad_mode_rejected(self):
        module = GanFusion(8, disc_norm="none").double()
        zeros = torch.zeros(1, 4, dtype=torch.float64)
        with pytest.raises(ValueError):
            ganfusion_step(module, zeros, zeros, mode="both")


class TestHeads:
    def test_zero_fused_zero_weights_uniform_softmax(self):
        model = build_model(small_config(fusion="concat"), seed=0)
        with torch.no_grad():
            for head in model.heads:
                head.weight.zero_()
                head.bias.zero_()
        x = torch.zeros(1, 8, 8, dtype=torch.float64)
        out = model(x)
        probs = torch.softmax(out.sector_logits[0], dim=-1)
        torch.testing.assert_close(probs, torch.full((1, 4), 0.25, dtype=torch.float64))

    def test_hand_weights_logits(self):
        cfg = small_config(fine_beam_count=2)
        model = build_model(cfg, seed=0)
        fused = torch.tensor([[1.0, 2.0] + [0.0] * 14], dtype=torch.float64)
        with torch.no_grad():
            head = model.heads[0]
            head.weight.zero_()
            head.bias.zero_()
            head.weight[0, 0] = 3.0   # logit0 = 3 * fused[0]
            head.weight[1, 1] = -1.0  # logit1 = -1 * fused[1]
            logits = head(fused)
        torch.testing.assert_close(logits, torch.tensor([[3.0, -2.0]], dtype=torch.float64))

    def test_softmax_shift_invariance_of_predict(self):
        model = build_model(small_config(), seed=5)
        x = np.random.default_rng(0).standard_normal((4, 8, 8))
        beams, _ = predict(model, x, [1, 2, 3, 1])
        with torch.no_grad():
            for head in model.heads:
                head.bias.add_(7.5)  # constant shift on every logit
        shifted, _ = predict(model, x, [1, 2, 3, 1])
        np.testing.assert_array_equal(beams, shifted)


class TestTotalLoss:
    def _output(self, model, x):
        return model(x)

    def test_perfect_prediction_zero_loss(self):
        cfg = small_config(fusion="concat", lambda_adv=0.0, lambda_auto=0.0)
        model = build_model(cfg, seed=0)
        x = torch.randn(2, 8, 8, dtype=torch.float64)
        out = model(x)
        # overwrite with a perfect output
        out.position = torch.tensor([[0.0, 0.0, 0.0], [1.0, 2.0, 3.0]], dtype=torch.float64)
        logits = torch.full((3, 2, 4), -1000.0, dtype=torch.float64)
        logits[0, 0, 2] = 1000.0
        logits[1, 1, 0] = 1000.0
        out.sector_logits = logits
        total, parts = total_loss(
            out,
            torch.tensor([2, 0]),
            torch.tensor([1, 2]),
            torch.tensor([[0.0, 0.0, 0.0], [1.0, 2.0, 3.0]], dtype=torch.float64),
            cfg,
        )
        assert float(total) == pytest.approx(0.0, abs=1e-12)
        assert parts["j_pos"] == 0.0 and parts["j_bm"] == pytest.approx(0.0, abs=1e-12)

    def test_uniform_prediction_gives_log_j(self):
        logits = torch.zeros(3, 5, 7, dtype=torch.float64)
        labels = torch.tensor([0, 1, 2, 3, 4])
        sectors = torch.tensor([1, 1, 2, 3, 2])
        assert float(beam_loss(logits, labels, sectors)) == pytest.approx(math.log(7.0), abs=1e-12)

    def test_published_task_weighting(self):
        # J_pos = 2 and J_bm = 1 weighted by (0.01, 0.99) gives 1.01
        cfg = small_config(fusion="concat", lambda_pos=0.01, lambda_bm=0.99, lambda_auto=0.0, lambda_adv=0.0)
        model = build_model(cfg, seed=0)
        out = model(torch.zeros(1, 8, 8, dtype=torch.float64))
        out.position = torch.tensor([[1.0, 1.0, 0.0]], dtype=torch.float64)  # squared error 2
        a = math.log(1.0 / (math.e - 1.0))
        logits = torch.full((3, 1, 4), -1000.0, dtype=torch.float64)
        logits[0, 0, 0] = a
        logits[0, 0, 1] = 0.0  # p(label 0) = 1/e, so CE = 1
        out.sector_logits = logits
        out.j_auto = torch.zeros((), dtype=torch.float64)
        total, parts = total_loss(
            out,
            torch.tensor([0]),
            torch.tensor([1]),
            torch.zeros(1, 3, dtype=torch.float64),
            cfg,
        )
        assert parts["j_pos"] == pytest.approx(2.0, abs=1e-12)
        assert parts["j_bm"] == pytest.approx(1.0, abs=1e-9)
        assert float(total) == pytest.approx(1.01, abs=1e-9)

    def test_lambda_linearity(self):
        torch.manual_seed(6)
        cfg1 = small_config(lambda_auto=0.1)
        cfg2 = small_config(lambda_auto=0.2)
        model = build_model(cfg1, seed=3)
        x = torch.randn(4, 8, 8, dtype=torch.float64)
        out = model(x)
        labels = torch.tensor([0, 1, 2, 3])
        sectors = torch.tensor([1, 2, 3, 1])
        positions = torch.randn(4, 3, dtype=torch.float64)
        t1, p1 = total_loss(out, labels, sectors, positions, cfg1)
        t2, p2 = total_loss(out, labels, sectors, positions, cfg2)
        assert float(t2 - t1) == pytest.approx(0.1 * p1["j_auto"], rel=1e-9)

    def test_label_out_of_range_rejected(self):
        logits = torch.zeros(3, 2, 4, dtype=torch.float64)
        with pytest.raises(ValueError):
            beam_loss(logits, torch.tensor([0, 4]), torch.tensor([1, 1]))


class TestGradients:
    def test_quadratic_scalar(self):
        w = torch.tensor(3.0, dtype=torch.float64, requires_grad=True)
        loss = w * w
        grads, disconnected = backward_with_diagnostics(loss, [("w", w)])
        assert float(grads["w"]) == 6.0
        assert disconnected == []

    def test_softmax_ce_gradient_at_uniform(self):
        logits = torch.zeros(1, 5, dtype=torch.float64, requires_grad=True)
        loss = torch.nn.functional.cross_entropy(logits, torch.tensor([2]))
        grads, _ = backward_with_diagnostics(loss, [("logits", logits)])
        expected = torch.full((1, 5), 0.2, dtype=torch.float64)
        expected[0, 2] -= 1.0
        torch.testing.assert_close(grads["logits"], expected)

    def test_disconnected_parameter_flagged_zero(self):
        w = torch.tensor(1.0, dtype=torch.float64, requires_grad=True)
        orphan = torch.tensor(5.0, dtype=torch.float64, requires_grad=True)
        loss = w * 2
        grads, disconnected = backward_with_diagnostics(loss, [("w", w), ("orphan", orphan)])
        assert disconnected == ["orphan"]
        assert float(grads["orphan"]) == 0.0

    @pytest.mark.parametrize(
        "make_layer",
        [
            lambda: torch.nn.Linear(6, 3),
            lambda: torch.nn.Sequential(torch.nn.Linear(6, 3), torch.nn.ReLU()),
            lambda: torch.nn.Sequential(torch.nn.Linear(6, 3), torch.nn.LeakyReLU()),
            lambda: torch.nn.Sequential(torch.nn.Linear(6, 3), torch.nn.Sigmoid()),
            lambda: torch.nn.Sequential(torch.nn.Linear(6, 6), torch.nn.BatchNorm1d(6)),
        ],
    )
    def test_primitive_gradients(self, make_layer):
        torch.manual_seed(0)
        layer = make_layer().double()
        layer.train()
        x = torch.randn(4, 6, dtype=torch.float64)
        target = torch.randn(4, layer(x).shape[-1], dtype=torch.float64)

        def loss_fn():
            return ((layer(x) - target) ** 2).sum()

        passed, records = finite_difference_check(loss_fn, layer.named_parameters(), probes=10, seed=1)
        assert passed, [r for r in records if not r["ok"]]

    def test_softmax_ce_primitive_gradient(self):
        torch.manual_seed(0)
        layer = torch.nn.Linear(6, 4).double()
        x = torch.randn(5, 6, dtype=torch.float64)
        labels = torch.tensor([0, 1, 2, 3, 0])

        def loss_fn():
            return torch.nn.functional.cross_entropy(layer(x), labels)

        passed, records = finite_difference_check(loss_fn, layer.named_parameters(), probes=10, seed=2)
        assert passed, records

    @pytest.mark.parametrize("fusion", ["auto", "gan", "concat"])
    def test_full_model_gradients(self, fusion):
        cfg = ModelConfig(
            input_shape=(8, 8), feature_dim=8, fine_beam_count=16, fusion=fusion, disc_norm="none"
        )
        model = build_model(cfg, seed=7)
        model.train()
        rng = np.random.default_rng(8)
        x = torch.from_numpy(rng.standard_normal((4, 8, 8)))
        labels = torch.from_numpy(rng.integers(0, 16, size=4))
        sectors = torch.from_numpy(rng.integers(1, 4, size=4))
        positions = torch.from_numpy(rng.standard_normal((4, 3)))

        def loss_fn():
            out = model(x)
            j_adv = None
            if fusion == "gan":
                j_adv = generator_loss(model.fusion.discriminate(out.f_gen))
            total, _ = total_loss(out, labels, sectors, positions, cfg, j_adv=j_adv)
            return total

        passed, records = finite_difference_check(
            loss_fn, model.named_parameters(), probes=20, seed=9
        )
        assert passed, [r for r in records if not r["ok"]]
