import json
import math
import logging
import numpy
from scipy.special import expit
from scipy.stats import norm
from .utils import as_key, child_key, to_unit, normals
from .rba import TARGETS, COLUMNS, DATA_DIR
from .cohort import Manifest, NO_APPARENT_NODE, canonical, combo_code, parse_combo, format_combo
from .metrics import ScoreRecord
from .errors import InvalidSpecError, CooccurLabError

logger = logging.getLogger(__name__)

_SUM_TOL = 1e-9


def _key_string(combo):
    return 'no_apparent' if combo == NO_APPARENT_NODE else format_combo(combo, '')

def _combo_flags(combo):
    flags = numpy.zeros(len(COLUMNS), dtype=numpy.bool_)
    if combo == NO_APPARENT_NODE:
        flags[-1] = True
    else:
        for name in combo:
            flags[TARGETS.index(name)] = True
    return flags


class PopulationSpec(object):
    '''Synthetic population: every subject draws its disease combination
    independently from combo_weights.

    Parameters:
    n_subjects: int - number of subjects.
    combo_weights: dict - combination -> probability. A combination is a
        '+'-joined string or tuple of target names, or 'no_apparent'.
    scans_per_subject: int - fixed to 1.
    seed: int - unsigned 64-bit seed.'''
    def __init__(self, n_subjects, combo_weights, scans_per_subject=1, seed=0):
        if isinstance(n_subjects, bool) or not isinstance(n_subjects, (int, numpy.integer)) or n_subjects < 0:
            raise InvalidSpecError('n_subjects must be a non-negative integer, got {!r}.'.format(n_subjects))
        if scans_per_subject != 1:
            raise InvalidSpecError('only one scan per subject is simulated, got {!r}.'.format(scans_per_subject))
        try:
            as_key(seed)
        except (TypeError, ValueError) as err:
            raise InvalidSpecError('population seed: {}'.format(err))
        weights = {}
        for combo, weight in dict(combo_weights).items():
            try:
                if isinstance(combo, str):
                    combo = parse_combo(combo)
                elif tuple(combo) != NO_APPARENT_NODE:
                    combo = canonical(combo)
            except CooccurLabError as err:
                raise InvalidSpecError('combination {!r}: {}'.format(combo, err))
            combo = tuple(combo)
            if combo == ():
                raise InvalidSpecError('a combination needs at least one target disease (or no_apparent).')
            if combo in weights:
                raise InvalidSpecError('combination {} is listed twice.'.format(_key_string(combo)))
            weight = float(weight)
            if not math.isfinite(weight) or weight < 0:
                raise InvalidSpecError('combination {} has invalid probability {}.'.format(_key_string(combo), weight))
            weights[combo] = weight
        total = sum(weights.values())
        if abs(total - 1.0) > _SUM_TOL:
            raise InvalidSpecError('combination probabilities sum to {}, not 1.'.format(total))
        self.n_subjects = int(n_subjects)
        self.combo_weights = weights
        self.scans_per_subject = 1
        self.seed = int(seed)

    def __repr__(self):
        return 'PopulationSpec({} subjects, {} combinations, seed={})'.format(
            self.n_subjects, len(self.combo_weights), self.seed)

    def table(self):
        '''Combinations ordered by bit-mask code with no_apparent last, and
        their probabilities.'''
        combos = sorted(self.combo_weights, key=lambda c: 16 if c == NO_APPARENT_NODE else combo_code(c))
        return combos, numpy.array([self.combo_weights[c] for c in combos], dtype=numpy.float64)

    def to_json(self):
        combos, weights = self.table()
        return {'n_subjects': self.n_subjects,
                'combo_weights': {_key_string(c): float(w) for c, w in zip(combos, weights)},
                'scans_per_subject': self.scans_per_subject,
                'seed': self.seed}


class ClassifierSpec(object):
    '''Score model: score = logistic(bias + sum of weights of the positive
    target diseases + Normal(0, noise_sd)).

    Parameters:
    weights: dict - target disease -> signal strength (missing diseases 0).
    bias: float
    noise_sd: float - noise standard deviation (> 0).
    seed: int - unsigned 64-bit seed.'''
    def __init__(self, weights, bias=0.0, noise_sd=1.0, seed=0):
        vector = numpy.zeros(len(TARGETS), dtype=numpy.float64)
        for name, weight in dict(weights).items():
            if name not in TARGETS:
                raise InvalidSpecError('{!r} is not a target disease.'.format(name))
            vector[TARGETS.index(name)] = float(weight)
        noise_sd = float(noise_sd)
        if not math.isfinite(noise_sd) or noise_sd <= 0:
            raise InvalidSpecError('noise_sd must be positive, got {}.'.format(noise_sd))
        bias = float(bias)
        if not (math.isfinite(bias) and numpy.isfinite(vector).all()):
            raise InvalidSpecError('weights and bias must be finite.')
        try:
            as_key(seed)
        except (TypeError, ValueError) as err:
            raise InvalidSpecError('classifier seed: {}'.format(err))
        self.vector = vector
        self.bias = bias
        self.noise_sd = noise_sd
        self.seed = int(seed)

    def __repr__(self):
        return 'ClassifierSpec({}, bias={}, noise_sd={}, seed={})'.format(
            self.weights, self.bias, self.noise_sd, self.seed)

    @property
    def weights(self):
        return {name: float(w) for name, w in zip(TARGETS, self.vector)}

    def mean(self, combo):
        '''Mean raw (pre-logistic) score of a combination.'''
        return self.bias + float(_combo_flags(tuple(combo))[:len(TARGETS)] @ self.vector)

    def to_json(self):
        return {'weights': self.weights, 'bias': self.bias,
                'noise_sd': self.noise_sd, 'seed': self.seed}


# ---- simulation ----
def sample_population(spec):
    '''Draw a synthetic one-scan-per-subject manifest.

    Subject i takes the uniform of stream (seed, i) and inverts the
    cumulative combination distribution. Subject ids are S000001, ...,
    scan ids C000001, ....

    Returns:
    manifest: Manifest'''
    if not isinstance(spec, PopulationSpec):
        raise TypeError('expected a PopulationSpec, got {}.'.format(type(spec).__name__))
    n = spec.n_subjects
    combos, weights = spec.table()
    cdf = numpy.cumsum(weights / weights.sum())
    last = numpy.flatnonzero(weights > 0)[-1]
    u = to_unit(child_key(as_key(spec.seed), numpy.arange(n)))
    pick = numpy.minimum(numpy.searchsorted(cdf, u, side='right'), last)
    table = numpy.array([_combo_flags(c) for c in combos], dtype=numpy.bool_)
    width = max(6, len(str(n)))
    subject_ids = ['S{:0{}d}'.format(i + 1, width) for i in range(n)]
    scan_ids = ['C{:0{}d}'.format(i + 1, width) for i in range(n)]
    logger.info('sampled %d subjects over %d combinations', n, len(combos))
    return Manifest(scan_ids, subject_ids, table[pick])

def raw_scores(manifest, clf):
    '''Pre-logistic scores; the noise of scan i comes from stream (seed, i).'''
    keys = child_key(as_key(clf.seed), numpy.arange(len(manifest)))
    signal = manifest.flags[:, :len(TARGETS)].astype(numpy.float64) @ clf.vector
    return clf.bias + signal + clf.noise_sd * normals(keys)

def simulate_scores(manifest, clf):
    '''Classifier scores for every scan of the manifest.

    Returns:
    scores: list of ScoreRecord - in manifest order.'''
    if not isinstance(clf, ClassifierSpec):
        raise TypeError('expected a ClassifierSpec, got {}.'.format(type(clf).__name__))
    scores = expit(raw_scores(manifest, clf))
    return [ScoreRecord(scan_id, s) for scan_id, s in zip(manifest.scan_ids, scores.tolist())]

def expected_auc(population, clf, target, pattern=None):
    '''Closed-form AUC of the simulator in the infinite-population limit.

    Positives are the combinations containing the target (with pattern
    given: exactly {target} + pattern); negatives are the combinations
    without it. Each combination scores Normal(mean, noise_sd) on the raw
    scale, so a (positive, negative) component pair contributes
    Phi((mu_pos - mu_neg) / (noise_sd * sqrt(2))).

    Returns:
    auc: float'''
    if target not in TARGETS:
        raise InvalidSpecError('{!r} is not a target disease.'.format(target))
    combos, weights = population.table()
    if pattern is None:
        is_pos = numpy.array([target in c for c in combos])
    else:
        want = canonical((target,) + tuple(pattern))
        is_pos = numpy.array([c == want for c in combos])
    is_neg = numpy.array([target not in c for c in combos])
    if weights[is_pos].sum() == 0 or weights[is_neg].sum() == 0:
        raise InvalidSpecError('the population has no weight on one of the classes.')
    mu = numpy.array([clf.mean(c) for c in combos])
    diff = mu[is_pos][:, None] - mu[is_neg][None, :]
    pair = numpy.outer(weights[is_pos], weights[is_neg])
    return float((pair * norm.cdf(diff / (clf.noise_sd * numpy.sqrt(2.0)))).sum() / pair.sum())

# ---- spec files ----
def _load_json(path, default):
    path = DATA_DIR / default if path is None else path
    with open(path, 'r', encoding='utf-8') as f:
        try:
            return path, json.load(f)
        except json.JSONDecodeError as err:
            raise InvalidSpecError('{}: {}'.format(path, err))

def _check_keys(obj, path, required, optional):
    if not isinstance(obj, dict):
        raise InvalidSpecError('{}: expected a JSON object.'.format(path))
    missing = [k for k in required if k not in obj]
    extra = [k for k in obj if k not in required + optional]
    if missing or extra:
        raise InvalidSpecError('{}: missing key(s) {}, unknown key(s) {}.'.format(path, missing, extra))

def load_population(path=None):
    '''Read a PopulationSpec JSON file (None: the shipped population).'''
    path, obj = _load_json(path, 'population.json')
    _check_keys(obj, path, ('n_subjects', 'combo_weights'), ('scans_per_subject', 'seed'))
    return PopulationSpec(obj['n_subjects'], obj['combo_weights'],
        obj.get('scans_per_subject', 1), obj.get('seed', 0))

def load_classifier(path=None):
    '''Read a ClassifierSpec JSON file (None: the shipped shortcut classifier).'''
    path, obj = _load_json(path, 'shortcut.json')
    _check_keys(obj, path, ('weights', 'noise_sd'), ('bias', 'seed'))
    return ClassifierSpec(obj['weights'], obj.get('bias', 0.0), obj['noise_sd'], obj.get('seed', 0))

def write_spec(spec, path):
    with open(path, 'w', encoding='utf-8', newline='\n') as f:
        json.dump(spec.to_json(), f, indent=2)
        f.write('\n')
