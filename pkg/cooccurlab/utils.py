import hashlib
import numbers
import numpy
import numba
from numba import njit, prange

'''Conventions:
Random streams (SplitMix64, counter mode).
    A stream is identified by a 64-bit key k. Its j-th draw (j = 1, 2, ...) is
        x_j = mix64(k + j*gamma),     gamma = 0x9E3779B97F4A7C15
    where mix64 is the SplitMix64 finalizer
        z ^= z >> 30; z *= 0xBF58476D1CE4E5B9
        z ^= z >> 27; z *= 0x94D049BB133111EB
        z ^= z >> 31
    (all arithmetic mod 2^64). A uniform in [0, 1) is (x_j >> 11) * 2^-53.
    Child streams are split off as
        child_key(k, i) = mix64(k ^ mix64((i+1)*gamma))
    so every resample / scan / stratum owns an independent stream and results
    never depend on evaluation order or thread count.
Label flags.
    A label row is a bool vector in column order
        [atelectasis, nodule, emphysema, effusion, other, no_apparent_disease]
    and a target-disease combination is encoded as the bit mask
        code = atelectasis + 2*nodule + 4*emphysema + 8*effusion.
'''
_GAMMA = numpy.uint64(0x9E3779B97F4A7C15)
_MIX1 = numpy.uint64(0xBF58476D1CE4E5B9)
_MIX2 = numpy.uint64(0x94D049BB133111EB)
_U64_MAX = 2**64 - 1
_TO_UNIT = 1.0 / 9007199254740992.0 # 2^-53

# ---- random streams ----
def as_key(seed):
    '''Convert an unsigned 64-bit integer seed to a stream key.

    Parameters:
    seed: int - seed in [0, 2^64).

    Returns:
    key: uint64 (1) - stream key.'''
    if isinstance(seed, (bool, numpy.bool_)) or not isinstance(seed, (numbers.Integral, numpy.integer)):
        raise TypeError('seed must be an integer, got {}.'.format(type(seed).__name__))
    seed = int(seed)
    if not 0 <= seed <= _U64_MAX:
        raise ValueError('seed {} is outside the unsigned 64-bit range.'.format(seed))
    return numpy.array([seed], dtype=numpy.uint64)

def mix64(z):
    '''SplitMix64 finalizer, elementwise on uint64 arrays (wraps mod 2^64).'''
    z = numpy.array(z, dtype=numpy.uint64, ndmin=1)
    z ^= z >> numpy.uint64(30)
    z *= _MIX1
    z ^= z >> numpy.uint64(27)
    z *= _MIX2
    z ^= z >> numpy.uint64(31)
    return z

def child_key(key, index):
    '''Split child stream keys off a parent key.

    Parameters:
    key: uint64 (...) - parent key(s).
    index: int (...) - child indices (broadcast against key).

    Returns:
    keys: uint64 (...) - child keys.'''
    index = numpy.array(index, dtype=numpy.uint64, ndmin=1)
    key = numpy.asarray(key, dtype=numpy.uint64)
    return mix64(key ^ mix64(_GAMMA * (index + numpy.uint64(1))))

def derive_seed(seed, tag):
    '''Derive a sub-seed for a named purpose (e.g. 'split', 'bootstrap').'''
    digest = hashlib.blake2b(str(tag).encode('utf-8'), digest_size=8).digest()
    tag_key = numpy.array([int.from_bytes(digest, 'little')], dtype=numpy.uint64)
    return int(mix64(as_key(seed) ^ tag_key)[0])

def to_unit(z):
    '''Map uint64 draws to doubles in [0, 1) using the top 53 bits.'''
    return (z >> numpy.uint64(11)).astype(numpy.float64) * _TO_UNIT

def uniforms(key, n):
    '''The first n uniforms of each stream.

    Parameters:
    key: uint64 (K) - stream keys.
    n: int - number of draws per stream.

    Returns:
    u: float (K, n) - uniforms in [0, 1).'''
    key = numpy.array(key, dtype=numpy.uint64, ndmin=1)
    steps = _GAMMA * numpy.arange(1, n + 1, dtype=numpy.uint64)
    return to_unit(mix64(key[:, None] + steps[None, :]))

def normals(keys):
    '''One standard normal per key (Box-Muller on child streams 0 and 1).'''
    u1 = to_unit(child_key(keys, 0))
    u2 = to_unit(child_key(keys, 1))
    return numpy.sqrt(-2.0 * numpy.log1p(-u1)) * numpy.cos(2.0 * numpy.pi * u2)

def permutation(key, k):
    '''Seeded Fisher-Yates permutation of range(k) driven by one stream.'''
    return fisher_yates(uniforms(key, k)[0])

def resample_indices(keys, n):
    '''For each key, n indices drawn from range(n) with replacement.

    Returns:
    idx: int (K, n) - resampled positions.'''
    u = uniforms(keys, n)
    return numpy.minimum((u * n).astype(numpy.int64), n - 1)

def set_threads(n):
    '''Cap numba's thread pool; n <= 0 restores the automatic size.'''
    limit = numba.config.NUMBA_NUM_THREADS
    n = int(n)
    n = limit if n <= 0 else min(n, limit)
    numba.set_num_threads(n)
    return n

# ---- shuffling ----
@njit
def fisher_yates(u):
    '''Fisher-Yates shuffle of range(k).

    Parameters:
    u: float (k) - uniforms in [0, 1); u[i] picks the swap partner of
        position i (i = k-1 down to 1).

    Returns:
    perm: int (k) - permutation.'''
    k = u.shape[0]
    perm = numpy.arange(k)
    for i in range(k - 1, 0, -1):
        j = int(u[i] * (i + 1))
        t = perm[i]
        perm[i] = perm[j]
        perm[j] = t
    return perm

# ---- label algebra ----
def combo_codes(flags):
    '''Bit-mask code of the target diseases of each label row.

    Parameters:
    flags: bool (L, >=4) - label rows.

    Returns:
    codes: int (L) - codes in [0, 16).'''
    bits = numpy.array([1, 2, 4, 8], dtype=numpy.int64)
    return flags[:, :4].astype(numpy.int64) @ bits

@njit
def group_union(groups, flags, n_groups):
    '''Union and intersection of label rows within groups (e.g. subjects).

    Parameters:
    groups: int (L) - group index of each row.
    flags: bool (L, C) - label rows.
    n_groups: int - number of groups.

    Returns:
    union: bool (n_groups, C) - column-wise OR over the rows of each group.
    every: bool (n_groups, C) - column-wise AND over the rows of each group.'''
    (L, C) = flags.shape
    union = numpy.zeros((n_groups, C), dtype=numpy.bool_)
    every = numpy.ones((n_groups, C), dtype=numpy.bool_)
    for i in range(L):
        g = groups[i]
        for c in range(C):
            union[g, c] = union[g, c] or flags[i, c]
            every[g, c] = every[g, c] and flags[i, c]
    return union, every

# ---- rank statistics ----
@njit
def mann_whitney_auc(pos, neg):
    '''Area under the ROC curve as the normalized Mann-Whitney U statistic.

    Parameters:
    pos: float (n1) - scores of positive samples.
    neg: float (n0) - scores of negative samples.

    Returns:
    auc: float - P(score_pos > score_neg) + 0.5 P(tie), nan if a class is empty.

    Note:
    Mid-ranks are half-integers, so the rank sum is exact in double precision
    while n1 + n0 < 2^52; the result then equals brute-force pair counting.'''
    n1 = pos.shape[0]
    n0 = neg.shape[0]
    if n1 == 0 or n0 == 0:
        return numpy.nan
    x = numpy.concatenate((pos, neg))
    order = numpy.argsort(x)
    n = n1 + n0
    rank_sum = 0.0
    i = 0
    while i < n:
        j = i
        while j + 1 < n and x[order[j + 1]] == x[order[i]]:
            j += 1
        mid = 0.5 * (i + j + 2) # mid-rank of the tie block [i, j]
        for k in range(i, j + 1):
            if order[k] < n1:
                rank_sum += mid
        i = j + 1
    u = rank_sum - 0.5 * n1 * (n1 + 1)
    return u / (n1 * n0)

@njit(parallel=True)
def bootstrap_auc(pos, neg, pos_idx, neg_idx):
    '''AUC of every bootstrap resample.

    Parameters:
    pos: float (n1) - positive scores.
    neg: float (n0) - negative scores.
    pos_idx: int (R, n1) - resampled positive positions.
    neg_idx: int (R, n0) - resampled negative positions.

    Returns:
    aucs: float (R) - resample AUCs (nan for a degenerate resample).'''
    R = pos_idx.shape[0]
    aucs = numpy.empty(R, dtype=numpy.float64)
    for r in prange(R):
        aucs[r] = mann_whitney_auc(pos[pos_idx[r]], neg[neg_idx[r]])
    return aucs
