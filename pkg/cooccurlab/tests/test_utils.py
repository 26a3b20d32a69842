import numpy as np
import pytest

from ..utils import (as_key, mix64, child_key, derive_seed, uniforms, normals,
    permutation, resample_indices, fisher_yates, combo_codes, group_union, mann_whitney_auc)

GAMMA = 0x9E3779B97F4A7C15


def test_splitmix64():

    ### The stream with key 0 is the reference SplitMix64 sequence seeded with 0
    z = mix64(np.array([GAMMA, 2 * GAMMA % 2**64, 3 * GAMMA % 2**64], dtype=np.uint64))
    assert [int(x) for x in z] == [0xE220A8397B1DCDAF, 0x6E789E6AA1B965F4, 0x06C45D188009454F]

    ### Uniforms take the top 53 bits
    u = uniforms(as_key(0), 3)
    assert u.shape == (1, 3)
    assert u[0, 0] == (0xE220A8397B1DCDAF >> 11) * 2.0**-53
    assert np.all((u >= 0) & (u < 1))

def test_as_key():
    assert as_key(2**64 - 1)[0] == np.uint64(2**64 - 1)
    with pytest.raises(ValueError):
        as_key(-1)
    with pytest.raises(ValueError):
        as_key(2**64)
    with pytest.raises(TypeError):
        as_key(1.5)
    with pytest.raises(TypeError):
        as_key(True)

def test_child_key():
    key = as_key(42)
    keys = child_key(key, np.arange(1000))
    assert keys.shape == (1000,)
    assert np.unique(keys).shape[0] == 1000
    assert np.array_equal(keys[[3, 7]], child_key(key, [3, 7]))
    assert not np.array_equal(keys, child_key(as_key(43), np.arange(1000)))

def test_derive_seed():
    assert derive_seed(7, 'split') == derive_seed(7, 'split')
    assert derive_seed(7, 'split') != derive_seed(7, 'bootstrap')
    assert derive_seed(7, 'split') != derive_seed(8, 'split')
    assert 0 <= derive_seed(2**64 - 1, 'population') < 2**64

def test_normals():
    z = normals(child_key(as_key(1), np.arange(200000)))
    assert np.all(np.isfinite(z))
    assert abs(z.mean()) < 0.01
    assert abs(z.std() - 1.0) < 0.01

def test_permutation():
    perm = permutation(as_key(5), 100)
    assert np.array_equal(np.sort(perm), np.arange(100))
    assert np.array_equal(perm, permutation(as_key(5), 100))
    assert not np.array_equal(perm, permutation(as_key(6), 100))
    assert permutation(as_key(5), 0).shape == (0,)

    ### u = 0 everywhere swaps each position with the front
    assert list(fisher_yates(np.zeros(4))) == [1, 2, 3, 0]

def test_resample_indices():
    idx = resample_indices(child_key(as_key(3), np.arange(50)), 17)
    assert idx.shape == (50, 17)
    assert idx.min() >= 0 and idx.max() < 17

def test_group_union():
    flags = np.array([[1, 0, 0], [0, 1, 0], [1, 0, 1], [1, 0, 0]], dtype=np.bool_)
    groups = np.array([0, 0, 1, 2])
    union, every = group_union(groups, flags, 3)
    assert np.array_equal(union, [[1, 1, 0], [1, 0, 1], [1, 0, 0]])
    assert np.array_equal(every, [[0, 0, 0], [1, 0, 1], [1, 0, 0]])

def test_combo_codes():
    flags = np.array([[0, 0, 0, 0, 0, 1], [1, 1, 0, 0, 0, 0], [0, 1, 1, 1, 1, 0]], dtype=np.bool_)
    assert list(combo_codes(flags)) == [0, 3, 14]

def test_mann_whitney_auc():
    assert mann_whitney_auc(np.array([0.9, 0.8]), np.array([0.1, 0.2, 0.3])) == 1.0
    assert mann_whitney_auc(np.array([0.5, 0.5]), np.array([0.5])) == 0.5
    assert mann_whitney_auc(np.array([0.4, 0.6]), np.array([0.5, 0.6])) == 0.375
    assert np.isnan(mann_whitney_auc(np.array([0.5]), np.zeros(0)))
