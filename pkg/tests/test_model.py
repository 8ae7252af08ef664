"""Unit tests for the model container, permutation indexing, and model files."""

from __future__ import annotations

import itertools
import math

import numpy as np
import pytest

from lomo.core import LomoError, Rng
from lomo.model import (
    MAX_TEMPLATES,
    LomoModel,
    init_model,
    load_model,
    perm_index,
    perm_unrank,
    rank_pattern,
    save_model,
)


# ---------------------------------------------------------------------------
# oracles


def oracle_rank_pattern(ks):
    """Rank of each entry by definition: 1 + the number of smaller entries."""
    return tuple(1 + sum(1 for other in ks if other < k) for k in ks)


def oracle_lex_rank(p):
    """1-based position of p among all permutations in lexicographic order."""
    universe = sorted(itertools.permutations(range(1, len(p) + 1)))
    return universe.index(tuple(p)) + 1


# ---------------------------------------------------------------------------
# rank_pattern


def test_rank_pattern_matches_counting_oracle():
    rng = np.random.default_rng(21)
    for _ in range(200):
        m = int(rng.integers(1, 7))
        ks = rng.choice(np.arange(1, 60), size=m, replace=False).tolist()
        assert rank_pattern(ks) == oracle_rank_pattern(ks)


def test_rank_pattern_known_cases():
    assert rank_pattern([4, 9, 17, 30]) == (1, 2, 3, 4)
    assert rank_pattern([4, 9, 30, 17]) == (1, 2, 4, 3)
    assert rank_pattern([30, 4, 9]) == (3, 1, 2)
    assert rank_pattern([5]) == (1,)


def test_rank_pattern_only_relative_order_matters():
    rng = np.random.default_rng(22)
    for _ in range(50):
        m = int(rng.integers(2, 6))
        ks = rng.choice(np.arange(1, 40), size=m, replace=False).tolist()
        stretched = [3 * k + 7 for k in ks]  # strictly monotone transform
        assert rank_pattern(ks) == rank_pattern(stretched)


def test_rank_pattern_rejects_bad_input():
    with pytest.raises(LomoError, match="at least one index"):
        rank_pattern([])
    with pytest.raises(LomoError, match="must be >= 1"):
        rank_pattern([0, 2])
    with pytest.raises(LomoError, match="duplicate frame indices"):
        rank_pattern([3, 3])


# ---------------------------------------------------------------------------
# permutation indexing


def test_perm_index_is_the_lexicographic_rank():
    for m in range(1, 7):
        for p in itertools.permutations(range(1, m + 1)):
            assert perm_index(p) == oracle_lex_rank(p)


def test_perm_index_anchor_values():
    assert perm_index((1, 2, 3, 4)) == 1
    assert perm_index((1, 2, 4, 3)) == 2
    assert perm_index((1, 3, 2, 4)) == 3
    assert perm_index((3, 1, 2)) == 5
    assert perm_index((1,)) == 1


def test_perm_unrank_inverts_perm_index():
    for m in range(1, 7):
        for idx in range(1, math.factorial(m) + 1):
            assert perm_index(perm_unrank(idx, m)) == idx
        for p in itertools.permutations(range(1, m + 1)):
            assert perm_unrank(perm_index(p), m) == p


def test_perm_index_rejects_non_permutations():
    with pytest.raises(LomoError, match="not a permutation"):
        perm_index((1, 3))
    with pytest.raises(LomoError, match="not a permutation"):
        perm_index((2, 2, 1))


def test_perm_unrank_range_checks():
    with pytest.raises(LomoError, match="out of range"):
        perm_unrank(0, 3)
    with pytest.raises(LomoError, match="out of range"):
        perm_unrank(7, 3)
    with pytest.raises(LomoError, match="m must be >= 1"):
        perm_unrank(1, 0)


# ---------------------------------------------------------------------------
# model container


def test_model_shape_validation():
    with pytest.raises(LomoError, match="cost table must have length 2"):
        LomoModel(np.zeros((2, 3)), np.zeros(3))  # needs 2! = 2 entries
    with pytest.raises(LomoError, match="at most"):
        LomoModel(np.zeros((MAX_TEMPLATES + 1, 2)), np.zeros(1))
    with pytest.raises(LomoError, match="finite"):
        LomoModel(np.array([[np.nan, 0.0]]), np.zeros(1))


def test_model_properties_and_equality():
    m = LomoModel(np.arange(6, dtype=float).reshape(2, 3), np.array([0.5, -0.5]))
    assert m.num_templates == 2
    assert m.dim == 3
    assert m == m.copy()
    other = m.copy()
    other.costs[0] = 9.0
    assert m != other


def test_model_copy_is_deep():
    m = LomoModel(np.zeros((1, 2)), np.zeros(1))
    c = m.copy()
    c.templates[0, 0] = 5.0
    assert m.templates[0, 0] == 0.0


def test_init_model_is_small_uniform_and_seeded():
    a = init_model(4, 3, Rng(5))
    b = init_model(4, 3, Rng(5))
    assert a == b
    assert a.templates.shape == (3, 4)
    assert np.all(a.templates >= 0.0) and np.all(a.templates < 0.01)
    np.testing.assert_array_equal(a.costs, np.zeros(6))


def test_init_model_validates_arguments():
    with pytest.raises(LomoError, match="dimension must be >= 1"):
        init_model(0, 1, Rng(0))
    with pytest.raises(LomoError, match="number of templates must be >= 1"):
        init_model(2, 0, Rng(0))
    with pytest.raises(LomoError, match="at most"):
        init_model(2, MAX_TEMPLATES + 1, Rng(0))


# ---------------------------------------------------------------------------
# model files


def test_save_load_round_trip_is_exact(tmp_path):
    rng = np.random.default_rng(31)
    for case in range(10):
        m_t = int(rng.integers(1, 5))
        d = int(rng.integers(1, 7))
        model = LomoModel(
            rng.normal(size=(m_t, d)) * 10.0 ** rng.integers(-12, 12),
            rng.normal(size=math.factorial(m_t)),
        )
        path = tmp_path / f"m{case}.lomo"
        save_model(model, path)
        loaded = load_model(path)
        np.testing.assert_array_equal(loaded.templates, model.templates)
        np.testing.assert_array_equal(loaded.costs, model.costs)


def test_model_file_format_is_versioned_text(tmp_path):
    model = LomoModel(np.array([[1.5, -0.25], [0.0, 3.0]]), np.array([0.5, -0.5]))
    path = tmp_path / "m.lomo"
    save_model(model, path)
    text = path.read_text(encoding="utf-8")
    assert text == (
        "LOMO v1\n"
        "M=2 d=2\n"
        "costs 0.5 -0.5\n"
        "w1 1.5 -0.25\n"
        "w2 0.0 3.0\n"
    )
    assert "\r" not in text
    for line in text.splitlines():
        assert line == line.rstrip()


def test_save_preserves_awkward_floats(tmp_path):
    model = LomoModel(np.array([[1 / 3, 1e-17]]), np.array([-0.0]))
    path = tmp_path / "m.lomo"
    save_model(model, path)
    loaded = load_model(path)
    assert loaded.templates[0, 0] == 1 / 3
    assert loaded.templates[0, 1] == 1e-17


def _write(tmp_path, text):
    path = tmp_path / "bad.lomo"
    path.write_text(text, encoding="utf-8")
    return path


def test_load_rejects_unsupported_version(tmp_path):
    path = _write(tmp_path, "LOMO v2\nM=1 d=1\ncosts 0.0\nw1 0.0\n")
    with pytest.raises(LomoError, match="unsupported"):
        load_model(path)


def test_load_rejects_garbage_header(tmp_path):
    path = _write(tmp_path, "hello\n")
    with pytest.raises(LomoError, match="line 1"):
        load_model(path)


def test_load_rejects_wrong_cost_count(tmp_path):
    path = _write(tmp_path, "LOMO v1\nM=2 d=1\ncosts 0.0\nw1 0.0\nw2 0.0\n")
    with pytest.raises(LomoError, match="line 3"):
        load_model(path)


def test_load_rejects_wrong_template_width(tmp_path):
    path = _write(tmp_path, "LOMO v1\nM=1 d=2\ncosts 0.0\nw1 0.0\n")
    with pytest.raises(LomoError, match="line 4"):
        load_model(path)


def test_load_rejects_non_numeric_token(tmp_path):
    path = _write(tmp_path, "LOMO v1\nM=1 d=1\ncosts zero\nw1 0.0\n")
    with pytest.raises(LomoError, match="non-numeric token 'zero'"):
        load_model(path)


def test_load_rejects_missing_template_line(tmp_path):
    path = _write(tmp_path, "LOMO v1\nM=2 d=1\ncosts 0.0 0.0\nw1 0.0\n")
    with pytest.raises(LomoError):
        load_model(path)
