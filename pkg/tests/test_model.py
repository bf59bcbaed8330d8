import math

import numpy as np
import pytest
import torch
from hypothesis import given
from hypothesis import strategies as st

from neuscrape import (
    LengthMismatch,
    ModelConfig,
    NeuScraperModel,
    SequenceTooLong,
    ShapeMismatch,
    TokenizerConfig,
    compute_loss,
    encode_node,
    encode_sequence,
    predict_labels,
    tokenize,
)
from neuscrape.model import bce_with_logits_sum, make_batch

from conftest import SMALL, SMALL_TOK
from oracles import brute_force_bce, gradient_check, random_problem, scalar_head


def test_config_validation():
    with pytest.raises(ValueError):
        ModelConfig(d_model=30, n_heads=8)
    with pytest.raises(ValueError):
        ModelConfig(n_labels=5)
    assert ModelConfig.from_dict(SMALL.to_dict()) == SMALL


def test_zero_weights_give_zero_node_vector(small_model):
    enc = small_model.node_encoder
    with torch.no_grad():
        for p in enc.parameters():
            p.zero_()
    out = encode_node([0], enc)
    assert out.shape == (SMALL.d_node,)
    assert torch.count_nonzero(out) == 0


def test_node_vector_determinism_and_order(small_model):
    enc = small_model.node_encoder
    ab, ba = tokenize("a b", SMALL_TOK), tokenize("b a", SMALL_TOK)
    with torch.no_grad():
        assert torch.equal(encode_node(ab, enc), encode_node(list(ab), enc))
        assert not torch.allclose(encode_node(ab, enc), encode_node(ba, enc))


@pytest.mark.parametrize("length", [1, 2, SMALL_TOK.t_max])
def test_node_vector_shape(small_model, length):
    with torch.no_grad():
        v = encode_node([0] + [5] * (length - 1), small_model.node_encoder)
    assert v.shape == (SMALL.d_node,) and torch.isfinite(v).all()


def test_encode_node_rejects_bad_tokens(small_model):
    with pytest.raises(ShapeMismatch):
        encode_node([], small_model.node_encoder)
    with pytest.raises(ShapeMismatch):
        encode_node([0, SMALL_TOK.vocab_size], small_model.node_encoder)
    with pytest.raises(ShapeMismatch):
        encode_node([0] * (SMALL_TOK.t_max + 1), small_model.node_encoder)


def test_encode_sequence_single_and_positions(small_model):
    seq = small_model.sequence
    h = torch.randn(1, SMALL.d_node)
    with torch.no_grad():
        assert encode_sequence(h, seq).shape == (1, SMALL.d_model)
        twin = encode_sequence(h.repeat(2, 1), seq)
    assert not torch.allclose(twin[0], twin[1])


def test_encode_sequence_errors(small_model):
    seq = small_model.sequence
    with pytest.raises(SequenceTooLong):
        encode_sequence(torch.zeros(SMALL.max_nodes + 1, SMALL.d_node), seq)
    with pytest.raises(ShapeMismatch):
        encode_sequence(torch.zeros(3, SMALL.d_node + 1), seq)
    with pytest.raises(ShapeMismatch):
        encode_sequence(torch.zeros(0, SMALL.d_node), seq)


def test_batched_matches_single(small_model):
    chunks, _ = random_problem(small_model, seed=3, n_chunks=1, nodes=7)
    others, _ = random_problem(small_model, seed=4, n_chunks=3, nodes=SMALL.max_nodes)
    others[1] = others[1][:2]
    with torch.no_grad():
        alone = small_model(make_batch(chunks))
        batched = small_model(make_batch(others[:1] + chunks + others[1:]))
    start = SMALL.max_nodes
    assert torch.allclose(alone, batched[start : start + 7], atol=1e-5, rtol=0)


def test_batch_bucketing_is_invisible(small_model):
    chunks, _ = random_problem(small_model, seed=5, n_chunks=4, nodes=9)
    with torch.no_grad():
        one = small_model(make_batch(chunks, bucket_tokens=10**9))
        many = small_model(make_batch(chunks, bucket_tokens=1))
    assert torch.allclose(one, many, atol=1e-5, rtol=0)


def test_zero_head_gives_half(small_model):
    head = small_model.head
    with torch.no_grad():
        for p in head.parameters():
            p.zero_()
        p = predict_labels(torch.randn(SMALL.d_model), head)
    assert torch.equal(p, torch.full((6,), 0.5, dtype=torch.float64))


def test_clamped_logit_stays_inside_unit_interval(small_model):
    head = small_model.head
    with torch.no_grad():
        head.fc2.weight.zero_()
        head.fc2.bias.fill_(1000.0)
        p = predict_labels(torch.randn(SMALL.d_model), head)
    assert torch.all(p < 1.0)
    assert torch.allclose(p, torch.full((6,), 1 - 9.357622968839e-14, dtype=torch.float64), atol=1e-20, rtol=1e-9)


def test_head_matches_scalar_oracle(small_model):
    torch.manual_seed(9)
    e = torch.randn(SMALL.d_model)
    with torch.no_grad():
        got = predict_labels(e, small_model.head).tolist()
    ref = scalar_head(e.tolist(), small_model.head)
    assert np.allclose(got, ref, atol=1e-6, rtol=0)


def test_head_is_per_node(small_model):
    e = torch.randn(5, SMALL.d_model)
    with torch.no_grad():
        before = predict_labels(e, small_model.head)
        e2 = e.clone()
        e2[2] += 10.0
        after = predict_labels(e2, small_model.head)
    keep = [0, 1, 3, 4]
    assert torch.equal(before[keep], after[keep])
    assert not torch.equal(before[2], after[2])
    with pytest.raises(ShapeMismatch):
        predict_labels(torch.zeros(SMALL.d_model + 1), small_model.head)


def test_other_nodes_matter_only_through_attention(small_model):
    chunks, _ = random_problem(small_model, seed=11, n_chunks=1, nodes=4)
    changed = [list(chunks[0][0]), list(chunks[0][1]), [0, 7, 8, 9], list(chunks[0][3])]
    with torch.no_grad():
        a = small_model(make_batch(chunks))
        b = small_model(make_batch([changed]))
    assert not torch.allclose(a[0], b[0])


def test_predict_proba_open_interval(small_model):
    chunks, _ = random_problem(small_model, seed=12)
    p = small_model.predict_proba(chunks)
    assert p.dtype == np.float64 and p.shape == (10, 6)
    assert np.all((p > 0) & (p < 1))


def test_loss_half_is_six_ln2():
    for y in ([0] * 6, [1] * 6, [1, 0, 1, 0, 0, 1]):
        assert abs(compute_loss([[0.5] * 6], [y]) - 6 * math.log(2)) <= 1e-9


def test_loss_at_clamp_is_tiny():
    hi = 1.0 / (1.0 + math.exp(-30.0))
    lo = 1.0 / (1.0 + math.exp(30.0))
    y = np.array([[1, 0, 1, 1, 0, 0], [0, 0, 0, 1, 1, 1]], dtype=float)
    p = np.where(y == 1, hi, lo)
    assert compute_loss(p, y) / 2 <= 1e-10
    assert compute_loss(p, y) <= 12 * math.log1p(math.exp(-30)) * (1 + 1e-6)


@given(st.integers(1, 20), st.integers(0, 2**32 - 1))
def test_loss_matches_brute_force(n, seed):
    rng = np.random.default_rng(seed)
    p = rng.uniform(1e-6, 1 - 1e-6, size=(n, 6))
    y = rng.integers(0, 2, size=(n, 6))
    ref = brute_force_bce(p.tolist(), y.tolist())
    got = compute_loss(p, y)
    assert abs(got - ref) <= 1e-9 * abs(ref)
    assert abs(compute_loss(p, y, "mean") - ref / (6 * n)) <= 1e-9 * abs(ref)
    assert got >= 0


def test_loss_errors():
    with pytest.raises(LengthMismatch):
        compute_loss(np.full((2, 6), 0.5), np.zeros((3, 6)))
    with pytest.raises(LengthMismatch):
        compute_loss(np.zeros((0, 6)), np.zeros((0, 6)))
    with pytest.raises(ValueError):
        compute_loss([[0.5] * 6], [[0] * 6], "median")


def test_training_loss_equals_probability_loss(small_model):
    chunks, y = random_problem(small_model, seed=13)
    with torch.no_grad():
        logits = small_model(make_batch(chunks)).double()
    from_logits = float(bce_with_logits_sum(logits, y))
    from_probs = compute_loss(torch.sigmoid(logits).numpy(), y.numpy())
    assert abs(from_logits - from_probs) <= 1e-9 * from_probs


def test_sequence_too_long_in_forward(small_model):
    chunks = [[[0, 5]] * (SMALL.max_nodes + 1)]
    with pytest.raises(SequenceTooLong):
        small_model(make_batch(chunks))


def test_gradients_64bit():
    torch.manual_seed(21)
    model = NeuScraperModel(SMALL, TokenizerConfig(vocab_size=67, t_max=8)).double()
    chunks, y = random_problem(model, seed=21)
    res = gradient_check(model, chunks, y, coords_per_tensor=3, seed=21, analytic_dtype=torch.float64)
    assert len({r[0] for r in res}) == len(list(model.parameters()))
    worst = max(res, key=lambda r: r[4])
    assert worst[4] <= 1e-6, worst
