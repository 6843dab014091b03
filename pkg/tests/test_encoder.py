import numpy as np
import pytest
import torch

from helpers import finite_difference_check
from lingmtl.encoder import (
    AdamState,
    TransformerEncoder,
    adam_step,
    named_gradients,
    pad_batch,
    sgd_step,
    truncated_normal,
)

VOCAB = 40


def tiny(layers=2, width=16, heads=2, seed=0, dtype=torch.float32):
    return TransformerEncoder(
        VOCAB, max_len=24, layers=layers, width=width, heads=heads,
        ffn_width=width * 2, seed=seed, dtype=dtype,
    )


def batch(*rows):
    ids = pad_batch([list(r) for r in rows])
    return ids, torch.zeros_like(ids)


class TestEmbed:
    def test_zero_tables_give_zero_vectors(self):
        model = tiny(layers=0)
        with torch.no_grad():
            for p in model.parameters():
                p.zero_()
        ids, segs = batch([2, 7, 3])
        assert model.embed(ids, segs).abs().max().item() == 0.0

    def test_zero_segment_row_reduces_to_token_plus_position(self):
        model = tiny(layers=0)
        with torch.no_grad():
            model.segment_embedding.weight[0].zero_()
        ids, segs = batch([2, 7, 3])
        out = model.embed(ids, segs)
        expected = (
            model.token_embedding(ids)
            + model.position_embedding(torch.arange(3))[None]
        )
        assert torch.equal(out, expected)

    def test_perturbing_one_token_is_local(self):
        model = tiny(layers=0)
        ids, segs = batch([2, 7, 3, 7])
        before = model.embed(ids, segs).detach().clone()
        with torch.no_grad():
            model.token_embedding.weight[7] += 1.0
        after = model.embed(ids, segs)
        changed = (after - before).abs().sum(dim=-1)[0]
        assert changed[1] > 0 and changed[3] > 0
        assert changed[0] == 0 and changed[2] == 0

    def test_position_overflow(self):
        model = tiny()
        ids, segs = batch(range(2, 2 + 30))
        with pytest.raises(ValueError):
            model.embed(ids, segs)

    def test_id_out_of_table(self):
        model = tiny()
        ids, segs = batch([VOCAB + 1])
        with pytest.raises(ValueError):
            model.embed(ids, segs)


class TestForward:
    def test_zero_layers_is_identity_stack(self):
        model = tiny(layers=0)
        ids, segs = batch([2, 7, 3])
        assert torch.equal(model(ids, segs), model.embed(ids, segs))

    def test_batch_rows_independent(self):
        model = tiny()
        a, segs_a = batch([2, 7, 3], [2, 9, 11])
        swapped, segs_b = batch([2, 9, 11], [2, 7, 3])
        out = model(a, segs_a)
        out_swapped = model(swapped, segs_b)
        assert torch.equal(out[0], out_swapped[1])
        assert torch.equal(out[1], out_swapped[0])

    def test_padding_does_not_leak(self):
        model = tiny()
        ids, segs = batch([2, 7, 3])
        padded = torch.cat([ids, torch.zeros(1, 4, dtype=torch.long)], dim=1)
        segs_padded = torch.zeros_like(padded)
        out = model(ids, segs)
        out_padded = model(padded, segs_padded)
        assert (out_padded[:, :3] - out).abs().max().item() <= 1e-6

    def test_layer_norm_core_statistics(self):
        norm = torch.nn.LayerNorm(64, eps=1e-12, dtype=torch.float64)
        x = torch.randn(5, 9, 64, dtype=torch.float64)
        out = norm(x)  # fresh init: gain 1, bias 0
        assert out.mean(dim=-1).abs().max().item() <= 1e-6
        assert (out.var(dim=-1, unbiased=False) - 1).abs().max().item() <= 1e-4


class TestBackward:
    def test_zero_upstream_gives_zero_grads(self):
        model = tiny()
        ids, segs = batch([2, 7, 3])
        loss = (model(ids, segs) * 0.0).sum()
        grads = named_gradients(loss, model)
        assert all(g.abs().max().item() == 0.0 for g in grads.values())

    def test_token_table_adjoint_counts_occurrences(self):
        model = tiny(layers=0)
        ids, segs = batch([7, 7, 9])
        loss = model(ids, segs).sum()
        grads = named_gradients(loss, model)
        g = grads["token_embedding.weight"]
        assert torch.allclose(g[7], torch.full((16,), 2.0))
        assert torch.allclose(g[9], torch.full((16,), 1.0))
        assert g[11].abs().max().item() == 0.0

    def test_finite_differences_on_tiny_model(self):
        model = tiny(dtype=torch.float64)
        ids, segs = batch([2, 7, 3, 9], [2, 11, 3, 0])

        def loss_fn():
            out = model(ids, segs)
            return (out * out).mean()

        failures = finite_difference_check(model, loss_fn, samples_per_param=4)
        assert failures == []


class TestOptimizers:
    def test_zero_gradients_leave_params(self):
        model = tiny()
        before = {n: p.detach().clone() for n, p in model.named_parameters()}
        grads = {n: torch.zeros_like(p) for n, p in model.named_parameters()}
        adam_step(model, grads, AdamState(), lr=0.1)
        for n, p in model.named_parameters():
            assert torch.equal(p, before[n])

    def test_first_adam_step_closed_form(self):
        lin = torch.nn.Linear(1, 1, bias=False)
        with torch.no_grad():
            lin.weight.fill_(2.0)
        grads = {"weight": torch.ones_like(lin.weight)}
        adam_step(lin, grads, AdamState(), lr=0.1)
        assert lin.weight.item() == pytest.approx(1.9, rel=1e-6)

    def test_nonfinite_gradient_names_parameter(self):
        model = tiny()
        grads = {n: torch.zeros_like(p) for n, p in model.named_parameters()}
        grads["token_embedding.weight"][0, 0] = float("nan")
        with pytest.raises(ValueError, match="token_embedding.weight"):
            adam_step(model, grads, AdamState())

    def test_sgd_step(self):
        lin = torch.nn.Linear(1, 1, bias=False)
        with torch.no_grad():
            lin.weight.fill_(2.0)
        sgd_step(lin, {"weight": torch.ones_like(lin.weight)}, lr=0.5)
        assert lin.weight.item() == pytest.approx(1.5)

    def test_adam_two_runs_bitwise_identical(self):
        results = []
        for _ in range(2):
            model = tiny(seed=5)
            state = AdamState()
            ids, segs = batch([2, 7, 3])
            for _step in range(3):
                loss = (model(ids, segs) ** 2).mean()
                adam_step(model, named_gradients(loss, model), state, lr=1e-3)
            results.append({n: p.detach().clone() for n, p in model.named_parameters()})
        for n in results[0]:
            assert torch.equal(results[0][n], results[1][n])


class TestInit:
    def test_same_seed_bitwise_identical(self):
        a, b = tiny(seed=3), tiny(seed=3)
        for (n1, p1), (_n2, p2) in zip(a.named_parameters(), b.named_parameters()):
            assert torch.equal(p1, p2), n1

    def test_different_seed_differs(self):
        a, b = tiny(seed=3), tiny(seed=4)
        assert any(
            not torch.equal(p1, p2)
            for (_n, p1), (_m, p2) in zip(a.named_parameters(), b.named_parameters())
        )

    def test_truncated_within_two_sigma(self):
        rng = np.random.default_rng(0)
        draws = truncated_normal(rng, (4000,), std=0.02)
        assert np.abs(draws).max() <= 0.04
        assert abs(draws.std() - 0.02) < 0.004

    def test_norm_gains_one_biases_zero(self):
        model = tiny()
        for name, p in model.named_parameters():
            if name.endswith("norm.weight"):
                assert torch.equal(p, torch.ones_like(p))
            if name.endswith(".bias") and "norm" in name:
                assert torch.equal(p, torch.zeros_like(p))


def test_pad_batch_right_pads():
    out = pad_batch([[2, 7], [2, 9, 11, 3]])
    assert out.shape == (2, 4)
    assert out[0].tolist() == [2, 7, 0, 0]
