import json
import math
import logging
import numpy
import pandas
from .utils import as_key, child_key, permutation, combo_codes, group_union
from .rba import TARGETS, COLUMNS, LabelVector
from .errors import (DuplicateScanIdError, MissingSubjectError,
    EmptyManifestError, UnknownClassError)

logger = logging.getLogger(__name__)

SPLITS = ('train', 'validation', 'test')
NO_APPARENT_NODE = ('no_apparent',)
_CUT_EPS = 1e-9


# ---- disease combinations ----
def combo_names(code):
    '''Target disease names of a bit-mask code, in canonical order.'''
    return tuple(name for i, name in enumerate(TARGETS) if (int(code) >> i) & 1)

def combo_code(names):
    '''Bit-mask code of a collection of target disease names.'''
    code = 0
    for name in names:
        if name not in TARGETS:
            raise UnknownClassError('{!r} is not a target disease.'.format(name))
        code |= 1 << TARGETS.index(name)
    return code

def canonical(names):
    '''Sort target disease names into canonical order (atelectasis, nodule,
    emphysema, effusion), dropping duplicates.'''
    return combo_names(combo_code(names))

def parse_combo(text):
    '''Parse a '+'-joined combination; '' and 'exclusive' denote the empty one.'''
    text = text.strip()
    if text in ('', 'exclusive'):
        return ()
    if text in ('no_apparent', 'no_apparent_disease'):
        return NO_APPARENT_NODE
    return canonical(part.strip() for part in text.split('+'))

def format_combo(combo, empty='exclusive'):
    return '+'.join(combo) if len(combo) > 0 else empty


class Manifest(object):
    '''Represents a dataset manifest: one label row per scan.

    Parameters:
    scan_ids: str (L) - unique scan identifiers.
    subject_ids: str (L) - subject of each scan.
    flags: bool (L, 6) - label rows in rba.COLUMNS order.'''
    def __init__(self, scan_ids, subject_ids, flags):
        self.scan_ids = numpy.array(list(scan_ids), dtype=object)
        self.subject_ids = numpy.array(list(subject_ids), dtype=object)
        self.flags = numpy.array(flags, dtype=numpy.bool_).reshape(-1, len(COLUMNS))
        if not (self.scan_ids.shape[0] == self.subject_ids.shape[0] == self.flags.shape[0]):
            raise ValueError('scan ids, subject ids and flags must have equal length.')
        seen = set()
        for scan_id in self.scan_ids:
            if scan_id in seen:
                raise DuplicateScanIdError(scan_id)
            seen.add(scan_id)
        bad = numpy.flatnonzero(self.flags[:, -1] == self.flags[:, :-1].any(-1))
        if bad.shape[0] > 0:
            raise ValueError('scan {!r}: no_apparent_disease must be set exactly when no disease is positive.'.format(self.scan_ids[bad[0]]))

    def __repr__(self):
        return 'Manifest({} scans, {} subjects)'.format(self.L, len(self.subjects()))

    def __len__(self):
        return self.L

    @property
    def L(self):
        return self.flags.shape[0]

    def __getitem__(self, item):
        if isinstance(item, (int, numpy.integer)):
            return (self.scan_ids[item], self.subject_ids[item], self.label(item))
        return Manifest(self.scan_ids[item], self.subject_ids[item], self.flags[item])

    def __iter__(self):
        for i in range(self.L):
            yield self[i]

    def label(self, i):
        return LabelVector(self.scan_ids[i], self.flags[i].copy())

    def labels(self):
        return [self.label(i) for i in range(self.L)]

    def counts(self):
        '''number of positive scans per label column'''
        return {name: int(n) for name, n in zip(COLUMNS, self.flags.sum(0))}

    def subjects(self):
        '''sorted unique subject ids'''
        return numpy.unique(self.subject_ids) if self.L > 0 else self.subject_ids.copy()

    def subject_index(self):
        '''sorted unique subject ids and the subject position of every scan'''
        subjects, inverse = numpy.unique(self.subject_ids, return_inverse=True)
        return subjects, inverse.reshape(-1).astype(numpy.int64)

    def subject_flags(self):
        '''Per-subject label union and intersection over the subject's scans.

        Returns:
        subjects: str (S) - sorted subject ids.
        union: bool (S, 6) - OR over the subject's scans.
        every: bool (S, 6) - AND over the subject's scans.'''
        subjects, inverse = self.subject_index()
        union, every = group_union(inverse, self.flags, subjects.shape[0])
        return subjects, union, every

    def codes(self):
        '''target-combination code of every scan'''
        return combo_codes(self.flags)


class SplitAssignment(object):
    '''Assignment of subjects to train / validation / test.

    Parameters:
    mapping: dict - subject id -> split name.
    seed: int - seed the assignment was drawn with (None if unknown).
    strata: dict - subject id -> 'normal' or 'diseased' (optional).'''
    def __init__(self, mapping, seed=None, strata=None):
        for subject, split in mapping.items():
            if split not in SPLITS:
                raise ValueError('subject {!r} has unknown split {!r}.'.format(subject, split))
        self.mapping = dict(mapping)
        self.seed = seed
        self.strata = {} if strata is None else dict(strata)

    def __repr__(self):
        sizes = self.sizes()
        return 'SplitAssignment({})'.format(', '.join('{}={}'.format(s, sizes[s]) for s in SPLITS))

    def __len__(self):
        return len(self.mapping)

    def __getitem__(self, subject_id):
        return self.mapping[subject_id]

    def __contains__(self, subject_id):
        return subject_id in self.mapping

    def __eq__(self, other):
        if not isinstance(other, SplitAssignment):
            return NotImplemented
        return self.mapping == other.mapping

    def members(self, split):
        return sorted(s for s, x in self.mapping.items() if x == split)

    def sizes(self, stratum=None):
        sizes = {split: 0 for split in SPLITS}
        for subject, split in self.mapping.items():
            if stratum is None or self.strata.get(subject) == stratum:
                sizes[split] += 1
        return sizes


class CooccurrenceTree(object):
    '''Exact-combination tally of unique subjects.

    Parameters:
    N: int - number of unique subjects.
    nodes: dict - combination (tuple of target names in canonical order, or
        ('no_apparent',)) -> number of subjects n.'''
    def __init__(self, N, nodes):
        self.N = N
        self.nodes = dict(nodes)

    def __repr__(self):
        lns = ['{}: {} ({:.1%})'.format(format_combo(combo, 'other only'), n, p) for combo, n, p in self.items()]
        return 'CooccurrenceTree(N={}\n{})'.format(self.N, '\n'.join(lns)).replace('\n', '\n  ')

    def __len__(self):
        return len(self.nodes)

    def __getitem__(self, combo):
        if isinstance(combo, str):
            combo = parse_combo(combo)
        elif tuple(combo) != NO_APPARENT_NODE:
            combo = canonical(combo)
        return self.nodes.get(tuple(combo), 0)

    def percent(self, combo):
        return self[combo] / self.N

    def items(self):
        '''(combo, n, percent) sorted by descending n, ties by combo'''
        order = sorted(self.nodes.items(), key=lambda item: (-item[1], list(item[0])))
        return [(combo, n, n / self.N) for combo, n in order]

    def to_json(self):
        return {'N': int(self.N),
                'nodes': [{'combo': list(combo), 'n': int(n), 'percent': p} for combo, n, p in self.items()]}


# ---- operations ----
def build_manifest(labels, subjects):
    '''Assemble a manifest from labels and a scan -> subject map.

    Parameters:
    labels: list of LabelVector
    subjects: dict - scan id -> subject id.'''
    subject_ids = []
    for label in labels:
        if label.scan_id not in subjects:
            raise MissingSubjectError(label.scan_id)
        subject_ids.append(subjects[label.scan_id])
    flags = numpy.array([label.flags for label in labels], dtype=numpy.bool_).reshape(-1, len(COLUMNS))
    return Manifest([label.scan_id for label in labels], subject_ids, flags)

def _cut(fraction, k):
    return min(k, int(math.floor(fraction * k + _CUT_EPS)))

def split_subjects(manifest, fractions=(0.70, 0.15, 0.15), seed=0):
    '''Split subjects into train / validation / test, separately for the
    normal stratum (every scan no apparent disease) and the diseased stratum.

    Within a stratum of k subjects (sorted by id), a seeded Fisher-Yates
    shuffle orders the subjects, and the cuts fall at floor(f_train*k) and
    floor((f_train+f_val)*k); the remainder is test.

    Parameters:
    manifest: Manifest - non-empty.
    fractions: (float, float, float) - train, validation and test fractions.
    seed: int - unsigned 64-bit seed.

    Returns:
    assignment: SplitAssignment'''
    if len(manifest) == 0:
        raise EmptyManifestError('cannot split an empty manifest.')
    fractions = tuple(float(f) for f in fractions)
    if len(fractions) != 3 or min(fractions) < 0 or abs(sum(fractions) - 1.0) > 1e-9:
        raise ValueError('split fractions must be three non-negative numbers summing to 1, got {}.'.format(fractions))
    key = as_key(seed)
    subjects, union, every = manifest.subject_flags()
    normal = every[:, -1]
    mapping, strata = {}, {}
    for stream, (stratum, mask) in enumerate((('normal', normal), ('diseased', ~normal))):
        members = subjects[mask]
        k = members.shape[0]
        order = members[permutation(child_key(key, stream), k)]
        c1 = _cut(fractions[0], k)
        c2 = max(c1, _cut(fractions[0] + fractions[1], k))
        for split, part in zip(SPLITS, (order[:c1], order[c1:c2], order[c2:])):
            for subject in part:
                mapping[subject] = split
                strata[subject] = stratum
        logger.debug('%s stratum: %d subjects -> %d/%d/%d', stratum, k, c1, c2 - c1, k - c2)
    return SplitAssignment(mapping, seed=seed, strata=strata)

def select_split(manifest, assignment, split):
    '''The scans of the subjects assigned to one split.'''
    if split not in SPLITS:
        raise ValueError('unknown split {!r}.'.format(split))
    mask = numpy.zeros(len(manifest), dtype=numpy.bool_)
    for i, subject in enumerate(manifest.subject_ids):
        if subject not in assignment:
            raise ValueError('subject {!r} has no split assignment.'.format(subject))
        mask[i] = assignment[subject] == split
    return manifest[mask]

def build_cooccurrence_tree(manifest):
    '''Tally unique subjects by their exact combination of target diseases.

    A subject's combination is the union of positives over its scans; a
    subject with no apparent disease on every scan falls in the
    ('no_apparent',) node, and a subject with only other diseases falls in
    the empty-combination node.

    Returns:
    tree: CooccurrenceTree'''
    if len(manifest) == 0:
        raise EmptyManifestError('cannot build a co-occurrence tree of an empty manifest.')
    subjects, union, every = manifest.subject_flags()
    normal = every[:, -1]
    nodes = {}
    if normal.any():
        nodes[NO_APPARENT_NODE] = int(normal.sum())
    counts = numpy.bincount(combo_codes(union[~normal]), minlength=16)
    for code in range(16):
        if counts[code] > 0:
            nodes[combo_names(code)] = int(counts[code])
    return CooccurrenceTree(subjects.shape[0], nodes)

def cooccurrence_matrix(manifest):
    '''Pairwise subject co-occurrence of the target diseases.

    Returns:
    mat: int (4, 4) - mat[i, j] = number of subjects positive for both
        TARGETS[i] and TARGETS[j]; the diagonal holds per-disease counts.'''
    if len(manifest) == 0:
        return numpy.zeros((len(TARGETS), len(TARGETS)), dtype=numpy.int64)
    subjects, union, every = manifest.subject_flags()
    U = union[:, :len(TARGETS)].astype(numpy.int64)
    return U.T @ U

# ---- file formats ----
def write_manifest(manifest, path):
    frame = pandas.DataFrame(manifest.flags.astype(numpy.int64), columns=list(COLUMNS))
    frame.insert(0, 'subject_id', list(manifest.subject_ids))
    frame.insert(0, 'scan_id', list(manifest.scan_ids))
    frame.to_csv(path, index=False)

def read_manifest(path):
    frame = pandas.read_csv(path, dtype={'scan_id': str, 'subject_id': str}, keep_default_na=False)
    missing = [col for col in ('scan_id', 'subject_id') + COLUMNS if col not in frame.columns]
    if missing:
        raise ValueError('{}: manifest lacks column(s) {}.'.format(path, ', '.join(missing)))
    flags = frame[list(COLUMNS)].to_numpy()
    if not numpy.isin(flags, [0, 1]).all():
        raise ValueError('{}: label columns must hold 0 or 1.'.format(path))
    return Manifest(frame['scan_id'].tolist(), frame['subject_id'].tolist(), flags.astype(numpy.bool_))

def write_splits(assignment, path):
    subjects = sorted(assignment.mapping)
    frame = pandas.DataFrame({'subject_id': subjects,
                              'split': [assignment[s] for s in subjects]})
    frame.to_csv(path, index=False)

def read_splits(path):
    frame = pandas.read_csv(path, dtype=str, keep_default_na=False)
    if list(frame.columns) != ['subject_id', 'split']:
        raise ValueError('{}: split file must have columns subject_id,split.'.format(path))
    if frame['subject_id'].duplicated().any():
        raise ValueError('{}: a subject is assigned more than once.'.format(path))
    return SplitAssignment(dict(zip(frame['subject_id'], frame['split'])))

def write_tree(tree, path):
    with open(path, 'w', encoding='utf-8', newline='\n') as f:
        json.dump(tree.to_json(), f, indent=2)
        f.write('\n')
