import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from actionseq.vocab import Vocabulary


def test_id_scheme():
    v = Vocabulary(["walk", "run", "sit"])
    assert v.encode(["walk"]) == [0]
    assert v.encode(["sit"]) == [2]
    assert v.n_classes == 3
    assert v.n_symbols == 6
    assert (v.sos, v.eos, v.pad) == (3, 4, 5)


def test_empty_encode():
    v = Vocabulary(["a"])
    assert v.encode([]) == []
    assert v.decode([]) == []


def test_unknown_token_named_in_error():
    v = Vocabulary(["walk", "run"])
    with pytest.raises(KeyError, match="jump"):
        v.encode(["walk", "jump"])


def test_decode_rejects_reserved_ids():
    v = Vocabulary(["a", "b"])
    with pytest.raises(ValueError):
        v.decode([2])  # SOS id


def test_name_of_reserved():
    v = Vocabulary(["a"])
    assert v.name_of(0) == "a"
    assert v.name_of(v.eos) == "<EOS>"


@settings(max_examples=100, deadline=None)
@given(st.lists(st.integers(min_value=0, max_value=4), max_size=12))
def test_round_trip(ids):
    v = Vocabulary(["a", "b", "c", "d", "e"])
    assert v.encode(v.decode(ids)) == ids


def test_validation():
    with pytest.raises(ValueError):
        Vocabulary([])
    with pytest.raises(ValueError):
        Vocabulary(["a", "a"])
    with pytest.raises(ValueError):
        Vocabulary(["a b"])
    with pytest.raises(ValueError):
        Vocabulary([""])


def test_save_load_stable(tmp_path):
    v = Vocabulary(["walk", "run", "sit"])
    path = tmp_path / "actions.vocab"
    v.save(path)
    w = Vocabulary.load(path)
    assert w == v
    assert w.content_hash() == v.content_hash()
    assert w.encode(["run"]) == v.encode(["run"])


def test_hash_changes_with_order():
    assert Vocabulary(["a", "b"]).content_hash() != Vocabulary(["b", "a"]).content_hash()
