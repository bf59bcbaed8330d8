import pytest
from hypothesis import given
from hypothesis import strategies as st

from neuscrape import TokenizerConfig, tokenize
from neuscrape.tokenizer import CLS_ID, fnv1a_64

CFG = TokenizerConfig()


@pytest.mark.parametrize(
    "data, expected",
    # published FNV-1a 64-bit test vectors
    [(b"", 0xCBF29CE484222325), (b"a", 0xAF63DC4C8601EC8C), (b"foobar", 0x85944171F73967E8)],
)
def test_fnv1a_vectors(data, expected):
    assert fnv1a_64(data) == expected


def test_empty_text_is_cls_only():
    assert tokenize("", CFG) == [CLS_ID]


def test_repeated_word_same_id():
    ids = tokenize("a a", CFG)
    assert len(ids) == 3 and ids[0] == CLS_ID and ids[1] == ids[2]


def test_hello_world_ids():
    expected = [0] + [3 + fnv1a_64(w) % (CFG.vocab_size - 3) for w in (b"hello", b"world")]
    assert tokenize("Hello  WORLD", CFG) == expected
    assert expected[1] != expected[2]


def test_truncation():
    cfg = TokenizerConfig(vocab_size=100, t_max=4)
    assert len(tokenize("a b c d e f", cfg)) == 4


def test_config_validation():
    with pytest.raises(ValueError):
        TokenizerConfig(vocab_size=3)
    with pytest.raises(ValueError):
        TokenizerConfig(t_max=1)


@given(st.text(max_size=300), st.integers(4, 5000), st.integers(2, 80))
def test_ids_in_range(text, vocab, t_max):
    cfg = TokenizerConfig(vocab, t_max)
    ids = tokenize(text, cfg)
    assert ids[0] == CLS_ID
    assert 1 <= len(ids) <= t_max
    assert all(3 <= i < vocab for i in ids[1:])
    assert ids == tokenize(text, cfg)
