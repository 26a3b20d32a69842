import enum
import math
import logging
import numpy
import pandas
from .utils import as_key, child_key, resample_indices, mann_whitney_auc, bootstrap_auc
from .rba import TARGETS, COLUMNS, NO_APPARENT
from .cohort import canonical, combo_code, format_combo
from .errors import (UnknownClassError, DegenerateClassError,
    InsufficientResamplesError, DuplicateScanIdError)

logger = logging.getLogger(__name__)

TASKS = ('MLCL', 'BCL', 'BNCL', 'BNNCL')
MLCL_CLASSES = TARGETS + (NO_APPARENT,)
EVAL_COLUMNS = ('task', 'target', 'pattern', 'auc', 'ci_low', 'ci_high', 'n_pos', 'n_neg')
_INDEX_BUDGET = 2000000 # resampled positions generated per chunk


class Truth(enum.IntEnum):
    EXCLUDED = -1
    NEGATIVE = 0
    POSITIVE = 1


class TaskSpec(object):
    '''A classification task definition.

    Parameters:
    kind: str - MLCL, BCL, BNCL or BNNCL (case-insensitive).
    target: str - class evaluated one-vs-rest for MLCL (a target disease or
        no_apparent_disease); fixed to nodule for BNCL/BNNCL; unused by BCL.'''
    def __init__(self, kind, target=None):
        kind = str(kind).upper()
        if kind not in TASKS:
            raise ValueError('unknown task {!r}; expected one of {}.'.format(kind, ', '.join(TASKS)))
        if target == 'no_apparent':
            target = NO_APPARENT
        if kind == 'MLCL':
            if target is None:
                raise UnknownClassError('MLCL needs a target class.')
            if target not in MLCL_CLASSES:
                raise UnknownClassError('unknown class {!r}.'.format(target))
        elif kind in ('BNCL', 'BNNCL'):
            if target not in (None, 'nodule'):
                raise ValueError('{} is defined for the nodule class only, got {!r}.'.format(kind, target))
            target = 'nodule'
        else:
            if target not in (None, 'abnormal'):
                raise ValueError('BCL has no target class, got {!r}.'.format(target))
            target = None
        self.kind = kind
        self.target = target

    def __repr__(self):
        return 'TaskSpec({}, {})'.format(self.kind, self.target_name)

    def __eq__(self, other):
        if not isinstance(other, TaskSpec):
            return NotImplemented
        return (self.kind, self.target) == (other.kind, other.target)

    @property
    def target_name(self):
        return 'abnormal' if self.target is None else self.target


class ScoreRecord(object):
    '''One model output.

    Parameters:
    scan_id: str
    score: float - finite score in [0, 1].'''
    def __init__(self, scan_id, score):
        score = float(score)
        if not math.isfinite(score) or not 0.0 <= score <= 1.0:
            raise ValueError('scan {!r}: score {} is not a finite value in [0, 1].'.format(scan_id, score))
        self.scan_id = scan_id
        self.score = score

    def __repr__(self):
        return 'ScoreRecord({}: {:.4f})'.format(self.scan_id, self.score)

    def __eq__(self, other):
        if not isinstance(other, ScoreRecord):
            return NotImplemented
        return self.scan_id == other.scan_id and self.score == other.score


class EvalResult(object):
    '''AUC with a percentile-bootstrap confidence interval.

    Parameters:
    auc: float - point estimate on the full data.
    ci_low, ci_high: float - interval bounds (ci_low <= ci_high; the point
        estimate is not forced inside).
    n_pos, n_neg: int - class sizes (both >= 1).
    subgroup: tuple of str - co-occurrence pattern of a stratified result,
        None for a whole-task result.
    task, target: str - what was evaluated.'''
    def __init__(self, auc, ci_low, ci_high, n_pos, n_neg, subgroup=None, task=None, target=None):
        if ci_low > ci_high:
            raise ValueError('ci_low {} exceeds ci_high {}.'.format(ci_low, ci_high))
        if n_pos < 1 or n_neg < 1:
            raise DegenerateClassError('an evaluation needs both classes (n_pos={}, n_neg={}).'.format(n_pos, n_neg))
        self.auc = auc
        self.ci_low = ci_low
        self.ci_high = ci_high
        self.n_pos = n_pos
        self.n_neg = n_neg
        self.subgroup = subgroup
        self.task = task
        self.target = target

    def __repr__(self):
        return 'EvalResult({} {} [{}]: auc={:.3f} ({:.3f}-{:.3f}), n_pos={}, n_neg={})'.format(
            self.task, self.target, self.pattern, self.auc, self.ci_low, self.ci_high, self.n_pos, self.n_neg)

    @property
    def pattern(self):
        return 'all' if self.subgroup is None else format_combo(self.subgroup)

    def as_row(self):
        return {'task': self.task, 'target': self.target, 'pattern': self.pattern,
                'auc': self.auc, 'ci_low': self.ci_low, 'ci_high': self.ci_high,
                'n_pos': self.n_pos, 'n_neg': self.n_neg}


# ---- task ground truth ----
def task_spec(kind, target=None):
    if isinstance(kind, TaskSpec):
        return kind
    return TaskSpec(kind, target)

def task_truth(manifest, task):
    '''Truth values of every manifest row for a task.

    Returns:
    truth: int (L) - Truth values aligned with the manifest rows.'''
    task = task_spec(task)
    F = manifest.flags
    atelectasis, nodule, emphysema, effusion = F[:, 0], F[:, 1], F[:, 2], F[:, 3]
    no_apparent = F[:, COLUMNS.index(NO_APPARENT)]
    truth = numpy.full(F.shape[0], int(Truth.EXCLUDED), dtype=numpy.int64)
    if task.kind == 'MLCL':
        truth[:] = numpy.where(F[:, COLUMNS.index(task.target)], int(Truth.POSITIVE), int(Truth.NEGATIVE))
    elif task.kind == 'BCL':
        truth[no_apparent] = Truth.NEGATIVE
        truth[F[:, :len(TARGETS)].any(-1)] = Truth.POSITIVE
    elif task.kind == 'BNCL':
        truth[no_apparent] = Truth.NEGATIVE
        truth[nodule] = Truth.POSITIVE
    else: # BNNCL
        truth[no_apparent | ((atelectasis | emphysema | effusion) & ~nodule)] = Truth.NEGATIVE
        truth[nodule] = Truth.POSITIVE
    return truth

def derive_task_labels(manifest, task):
    '''Ground truth of a task for every scan.

    Parameters:
    manifest: Manifest
    task: TaskSpec (or a task kind string)

    Returns:
    truth: dict - scan id -> Truth (POSITIVE, NEGATIVE or EXCLUDED).'''
    truth = task_truth(manifest, task)
    return {scan_id: Truth(v) for scan_id, v in zip(manifest.scan_ids, truth.tolist())}

# ---- AUC ----
def _split_scores(scores, truth):
    pos, neg = [], []
    seen = set()
    for record in scores:
        if record.scan_id in seen:
            raise DuplicateScanIdError(record.scan_id)
        seen.add(record.scan_id)
        if not math.isfinite(record.score):
            raise ValueError('scan {!r} has a non-finite score.'.format(record.scan_id))
        label = truth.get(record.scan_id, Truth.EXCLUDED)
        if label == Truth.POSITIVE:
            pos.append(record.score)
        elif label == Truth.NEGATIVE:
            neg.append(record.score)
    pos = numpy.array(pos, dtype=numpy.float64)
    neg = numpy.array(neg, dtype=numpy.float64)
    if pos.shape[0] == 0 or neg.shape[0] == 0:
        raise DegenerateClassError('an AUC needs scored positives and negatives (n_pos={}, n_neg={}).'.format(pos.shape[0], neg.shape[0]))
    return pos, neg

def _bootstrap(pos, neg, level, resamples, seed):
    if resamples < 100:
        raise ValueError('bootstrap needs at least 100 resamples, got {}.'.format(resamples))
    if not 0.0 < level < 1.0:
        raise ValueError('confidence level must lie in (0, 1), got {}.'.format(level))
    key = as_key(seed)
    chunk = max(1, min(resamples, _INDEX_BUDGET // (pos.shape[0] + neg.shape[0])))
    aucs = numpy.empty(resamples, dtype=numpy.float64)
    for start in range(0, resamples, chunk):
        stop = min(resamples, start + chunk)
        keys = child_key(key, numpy.arange(start, stop)) # resample i owns stream (seed, i)
        pos_idx = resample_indices(child_key(keys, 0), pos.shape[0])
        neg_idx = resample_indices(child_key(keys, 1), neg.shape[0])
        aucs[start:stop] = bootstrap_auc(pos, neg, pos_idx, neg_idx)
    valid = aucs[~numpy.isnan(aucs)]
    if 2 * valid.shape[0] < resamples:
        raise InsufficientResamplesError('{} of {} resamples are degenerate.'.format(resamples - valid.shape[0], resamples))
    if valid.shape[0] < resamples:
        logger.warning('skipped %d degenerate resamples', resamples - valid.shape[0])
    alpha = (1.0 - level) / 2.0
    low, high = numpy.quantile(valid, [alpha, 1.0 - alpha])
    return float(low), float(high)

def auc(scores, truth):
    '''Mann-Whitney AUC: the fraction of (positive, negative) pairs in which
    the positive scores higher, ties counting one half.

    Parameters:
    scores: list of ScoreRecord
    truth: dict - scan id -> Truth. Excluded scans and scores of scans
        missing from truth are ignored.

    Returns:
    auc: float'''
    pos, neg = _split_scores(scores, truth)
    return float(mann_whitney_auc(pos, neg))

def bootstrap_ci(scores, truth, level=0.95, resamples=2000, seed=0):
    '''Percentile-bootstrap confidence interval of the AUC.

    Positives and negatives are resampled with replacement separately;
    resample i draws from its own stream derived from (seed, i), so the
    interval does not depend on execution order or thread count.

    Returns:
    (ci_low, ci_high): (float, float)'''
    pos, neg = _split_scores(scores, truth)
    return _bootstrap(pos, neg, level, resamples, seed)

def _result(scores, truth, level, resamples, seed, subgroup, task, target):
    pos, neg = _split_scores(scores, truth)
    low, high = _bootstrap(pos, neg, level, resamples, seed)
    return EvalResult(float(mann_whitney_auc(pos, neg)), low, high,
        pos.shape[0], neg.shape[0], subgroup=subgroup, task=task, target=target)

def evaluate(scores, manifest, task, level=0.95, resamples=2000, seed=0):
    '''AUC and confidence interval of one task over the manifest.'''
    task = task_spec(task)
    truth = derive_task_labels(manifest, task)
    return _result(scores, truth, level, resamples, seed, None, task.kind, task.target_name)

def evaluate_all(scores, manifest, kind, level=0.95, resamples=2000, seed=0):
    '''Evaluate a task kind: every MLCL class one-vs-rest (classes without
    positives are skipped), or the single binary task.'''
    kind = str(kind).upper()
    if kind != 'MLCL':
        return [evaluate(scores, manifest, kind, level, resamples, seed)]
    results = []
    for target in MLCL_CLASSES:
        try:
            results.append(evaluate(scores, manifest, TaskSpec(kind, target), level, resamples, seed))
        except DegenerateClassError as err:
            logger.warning('skipped MLCL class %s: %s', target, err)
    return results

def stratified_eval(scores, manifest, target, pattern=(), level=0.95, resamples=2000, seed=0, task='MLCL'):
    '''AUC of the target on the scans whose exact target-disease combination
    is {target} + pattern, against every target-negative scan.

    Parameters:
    scores: list of ScoreRecord
    manifest: Manifest - the evaluation scans (e.g. the test split).
    target: str - one of the four target diseases.
    pattern: iterable of str - co-occurring diseases; empty means the target
        occurs exclusively.

    Returns:
    result: EvalResult - with subgroup = pattern in canonical order.'''
    if target not in TARGETS:
        raise UnknownClassError('{!r} is not a target disease.'.format(target))
    pattern = tuple(name for name in canonical(pattern) if name != target)
    want = combo_code((target,) + pattern)
    column = manifest.flags[:, TARGETS.index(target)]
    truth = numpy.where(column, int(Truth.EXCLUDED), int(Truth.NEGATIVE))
    truth[manifest.codes() == want] = Truth.POSITIVE
    if not (truth == Truth.POSITIVE).any():
        raise DegenerateClassError('no {} scan co-occurs with exactly [{}].'.format(target, format_combo(pattern)))
    truth = dict(zip(manifest.scan_ids, truth.tolist()))
    return _result(scores, truth, level, resamples, seed, pattern, str(task).upper(), target)

def stratified_table(scores, manifest, target, level=0.95, resamples=2000, seed=0, task='MLCL'):
    '''stratified_eval over every co-occurrence pattern of the target that
    has positives, smallest patterns first. The n_pos of the rows partition
    the scored target-positive scans.'''
    if target not in TARGETS:
        raise UnknownClassError('{!r} is not a target disease.'.format(target))
    others = [name for name in TARGETS if name != target]
    patterns = []
    for code in range(1 << len(others)):
        patterns.append(tuple(name for i, name in enumerate(others) if (code >> i) & 1))
    patterns.sort(key=lambda p: (len(p), combo_code(p)))
    results = []
    for pattern in patterns:
        try:
            results.append(stratified_eval(scores, manifest, target, pattern, level, resamples, seed, task))
        except DegenerateClassError as err:
            logger.debug('no subgroup [%s]: %s', format_combo(pattern), err)
    return results

# ---- file formats ----
def read_scores(path):
    frame = pandas.read_csv(path, dtype={'scan_id': str}, keep_default_na=False)
    if list(frame.columns) != ['scan_id', 'score']:
        raise ValueError('{}: scores file must have columns scan_id,score.'.format(path))
    return [ScoreRecord(scan_id, score) for scan_id, score in zip(frame['scan_id'], frame['score'])]

def write_scores(scores, path):
    frame = pandas.DataFrame({'scan_id': [record.scan_id for record in scores],
                              'score': numpy.array([record.score for record in scores], dtype=numpy.float64)})
    frame.to_csv(path, index=False, float_format='%.17g')

def write_eval(results, path_or_buf):
    frame = pandas.DataFrame([result.as_row() for result in results], columns=list(EVAL_COLUMNS))
    frame.to_csv(path_or_buf, index=False, float_format='%.6f')
