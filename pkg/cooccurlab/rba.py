import re
import json
import logging
from pathlib import Path
from functools import partial
from concurrent.futures import ProcessPoolExecutor
import numpy
import pandas
from .errors import DictionaryError, DuplicateScanIdError, UnknownClassError

logger = logging.getLogger(__name__)

TARGETS = ('atelectasis', 'nodule', 'emphysema', 'effusion')
OTHER = 'other'
NO_APPARENT = 'no_apparent_disease'
COLUMNS = TARGETS + (OTHER, NO_APPARENT) # column order of a label row
DATA_DIR = Path(__file__).parent / 'data'

_INDEX = {name: i for i, name in enumerate(COLUMNS)}
_INDEX['other_disease'] = _INDEX[OTHER]
_TERMINATOR = re.compile(r'[.!?\n]')


class Report(object):
    '''One radiology report.

    Parameters:
    subject_id: str - patient identifier (may repeat across scans).
    scan_id: str - CT volume identifier (unique within a corpus).
    text: str - free-form report text.'''
    def __init__(self, subject_id, scan_id, text):
        self.subject_id = subject_id
        self.scan_id = scan_id
        self.text = '' if text is None else text

    def __repr__(self):
        return 'Report({}/{}: {!r})'.format(self.subject_id, self.scan_id, self.text[:40])


class LabelVector(object):
    '''Per-scan labels.

    Parameters:
    scan_id: str - the scan these labels belong to.
    flags: bool (6) - [atelectasis, nodule, emphysema, effusion, other,
        no_apparent_disease]. no_apparent_disease must hold exactly when the
        five disease flags are all false.'''
    def __init__(self, scan_id, flags):
        flags = numpy.array(flags, dtype=numpy.bool_)
        if flags.shape != (len(COLUMNS),):
            raise ValueError('label flags must have shape ({},), got {}.'.format(len(COLUMNS), flags.shape))
        if flags[-1] == flags[:-1].any():
            raise ValueError('scan {!r}: no_apparent_disease must be set exactly when no disease is positive.'.format(scan_id))
        self.scan_id = scan_id
        self.flags = flags

    def __repr__(self):
        if self.no_apparent_disease:
            txt = 'no apparent disease'
        else:
            txt = ', '.join(name for name, flag in zip(COLUMNS, self.flags) if flag)
        return 'LabelVector({}: {})'.format(self.scan_id, txt)

    def __eq__(self, other):
        if not isinstance(other, LabelVector):
            return NotImplemented
        return self.scan_id == other.scan_id and numpy.array_equal(self.flags, other.flags)

    @property
    def atelectasis(self):
        return bool(self.flags[0])

    @property
    def nodule(self):
        return bool(self.flags[1])

    @property
    def emphysema(self):
        return bool(self.flags[2])

    @property
    def effusion(self):
        return bool(self.flags[3])

    @property
    def other_disease(self):
        return bool(self.flags[4])

    @property
    def no_apparent_disease(self):
        return bool(self.flags[5])

    def positives(self):
        '''names of the positive target diseases, in canonical order'''
        return tuple(name for name, flag in zip(TARGETS, self.flags) if flag)


def _term_set(terms, what):
    if isinstance(terms, str):
        raise TypeError('{} must be a collection of terms, not a string.'.format(what))
    return frozenset(terms)

def _pattern(terms, plural=True):
    # whole words, case-insensitive; with plural, t also matches t+'s' and t+'es'
    alternatives = '|'.join(re.escape(t) for t in sorted(terms, key=lambda t: (-len(t), t)))
    suffix = r'(?:e?s)?' if plural else ''
    return re.compile(r'\b(?:{}){}\b'.format(alternatives, suffix), re.IGNORECASE)


class RuleDictionary(object):
    '''Keyword dictionary of the rule-based labeler.

    Parameters:
    organ_terms: iterable of str - organ descriptors (e.g. 'lung', 'lobe').
    disease_terms: dict - target disease name -> synonyms, for exactly the
        four targets.
    negation_terms: iterable of str - negation cues (e.g. 'no', 'without').
    other_disease_terms: dict - name -> synonyms of the diseases that are
        screened only to decide no_apparent_disease.

    All terms are lowercase; a negation cue may not double as a disease synonym.'''
    def __init__(self, organ_terms, disease_terms, negation_terms, other_disease_terms=None):
        self.organ_terms = _term_set(organ_terms, 'organ_terms')
        self.disease_terms = {name: _term_set(terms, name) for name, terms in disease_terms.items()}
        self.negation_terms = _term_set(negation_terms, 'negation_terms')
        other_disease_terms = {} if other_disease_terms is None else other_disease_terms
        self.other_disease_terms = {name: _term_set(terms, name) for name, terms in other_disease_terms.items()}
        self.validate()
        self._organ = _pattern(self.organ_terms)
        self._negation = _pattern(self.negation_terms, plural=False)
        self._diseases = [(name, _pattern(self.disease_terms[name])) for name in TARGETS]
        others = frozenset().union(*self.other_disease_terms.values())
        self._other = _pattern(others) if others else None

    def __repr__(self):
        return 'RuleDictionary({} organ, {} negation, {} target and {} other disease entries)'.format(
            len(self.organ_terms), len(self.negation_terms),
            len(self.disease_terms), len(self.other_disease_terms))

    def validate(self):
        missing = [name for name in TARGETS if name not in self.disease_terms]
        if missing:
            raise DictionaryError('disease_terms lacks target disease(s) {}.'.format(', '.join(missing)))
        extra = sorted(set(self.disease_terms) - set(TARGETS))
        if extra:
            raise DictionaryError('disease_terms declares unknown target(s) {}; list them under other_disease_terms.'.format(', '.join(extra)))
        groups = [('organ_terms', self.organ_terms), ('negation_terms', self.negation_terms)]
        groups += sorted(self.disease_terms.items()) + sorted(self.other_disease_terms.items())
        for name, terms in groups:
            if len(terms) == 0:
                raise DictionaryError('term set {!r} is empty.'.format(name))
            for term in terms:
                if not isinstance(term, str) or not term.strip() or term != term.lower() or term != term.strip():
                    raise DictionaryError('term {!r} in {!r} must be a non-empty lowercase string.'.format(term, name))
        synonyms = frozenset().union(*self.disease_terms.values(), *self.other_disease_terms.values())
        clash = sorted(self.negation_terms & synonyms)
        if clash:
            raise DictionaryError('term(s) {} are both negation cues and disease synonyms.'.format(', '.join(clash)))
        return self

    def to_json(self):
        return {
            'organ_terms': sorted(self.organ_terms),
            'disease_terms': {name: sorted(self.disease_terms[name]) for name in TARGETS},
            'negation_terms': sorted(self.negation_terms),
            'other_disease_terms': {name: sorted(terms) for name, terms in sorted(self.other_disease_terms.items())},
        }


# ---- sentence rules ----
def _is_initial(text, i):
    # a single-letter token right before the period, e.g. "J. Smith"
    return i >= 1 and text[i-1].isalpha() and (i == 1 or not text[i-2].isalnum())

def segment_sentences(text):
    '''Split report text into sentences at '.', '!', '?' and newlines.

    A period after a single-letter token (an initial) does not end a sentence.
    Delimiters are dropped and sentences are stripped; blank ones are skipped.'''
    sentences = []
    start = 0
    for m in _TERMINATOR.finditer(text):
        i = m.start()
        if text[i] == '.' and _is_initial(text, i):
            continue
        sentence = text[start:i].strip()
        if sentence:
            sentences.append(sentence)
        start = i + 1
    sentence = text[start:].strip()
    if sentence:
        sentences.append(sentence)
    return sentences

def match_sentence(sentence, dictionary):
    '''Diseases asserted by a single sentence.

    A disease is positive iff the sentence mentions an organ descriptor, a
    synonym of the disease, and no negation cue anywhere. Other-disease
    synonyms map to the single name 'other'.

    Parameters:
    sentence: str - one segmented sentence.
    dictionary: RuleDictionary

    Returns:
    found: set of str - positive names among TARGETS and 'other'.'''
    sentence = ' '.join(sentence.split())
    if dictionary._negation.search(sentence) or not dictionary._organ.search(sentence):
        return set()
    found = {name for name, pattern in dictionary._diseases if pattern.search(sentence)}
    if dictionary._other is not None and dictionary._other.search(sentence):
        found.add(OTHER)
    return found

def evidence(sentence, dictionary):
    '''Explain match_sentence: the organ and disease words behind each
    positive name, as {name: (organ_word, disease_word)}.'''
    sentence = ' '.join(sentence.split())
    found = match_sentence(sentence, dictionary)
    if not found:
        return {}
    organ = dictionary._organ.search(sentence).group(0).lower()
    patterns = dict(dictionary._diseases)
    if OTHER in found:
        patterns[OTHER] = dictionary._other
    return {name: (organ, patterns[name].search(sentence).group(0).lower()) for name in found}

def label_report(report, dictionary):
    '''Label one report: each disease flag is the OR over its sentences, and
    no_apparent_disease holds only when no target or other disease fired.

    Parameters:
    report: Report
    dictionary: RuleDictionary

    Returns:
    labels: LabelVector'''
    flags = numpy.zeros(len(COLUMNS), dtype=numpy.bool_)
    for sentence in segment_sentences(report.text):
        for name in match_sentence(sentence, dictionary):
            flags[_INDEX[name]] = True
    flags[-1] = not flags[:-1].any()
    return LabelVector(report.scan_id, flags)

def label_corpus(reports, dictionary, workers=1):
    '''Label a corpus in input order.

    Parameters:
    reports: list of Report - scan ids must be unique.
    dictionary: RuleDictionary
    workers: int - worker processes; the output does not depend on it.

    Returns:
    labels: list of LabelVector'''
    seen = set()
    for report in reports:
        if report.scan_id in seen:
            raise DuplicateScanIdError(report.scan_id)
        seen.add(report.scan_id)
    if workers is None or workers <= 1 or len(reports) < 2:
        labels = [label_report(report, dictionary) for report in reports]
    else:
        chunksize = max(1, len(reports) // (4 * workers))
        with ProcessPoolExecutor(max_workers=workers) as pool:
            labels = list(pool.map(partial(label_report, dictionary=dictionary), reports, chunksize=chunksize))
    logger.info('labeled %d reports (%d no apparent disease)', len(labels),
        sum(label.no_apparent_disease for label in labels))
    return labels

# ---- constructors ----
def label_vector(scan_id, *positives):
    '''Construct a LabelVector from the names of its positive diseases.

    Parameters:
    scan_id: str
    *positives: str - names among TARGETS, 'other' or 'other_disease'.
        No names gives a no-apparent-disease vector.'''
    flags = numpy.zeros(len(COLUMNS), dtype=numpy.bool_)
    for name in positives:
        if name not in _INDEX or name == NO_APPARENT:
            raise UnknownClassError('unknown disease {!r}.'.format(name))
        flags[_INDEX[name]] = True
    flags[-1] = not flags[:-1].any()
    return LabelVector(scan_id, flags)

def load_dictionary(path=None):
    '''Load a RuleDictionary from JSON (the shipped lung/pleura dictionary
    when path is None).'''
    path = DATA_DIR / 'lung.json' if path is None else Path(path)
    with open(path, encoding='utf-8') as f:
        obj = json.load(f)
    if not isinstance(obj, dict):
        raise DictionaryError('{}: expected a JSON object.'.format(path))
    missing = [key for key in ('organ_terms', 'disease_terms', 'negation_terms') if key not in obj]
    if missing:
        raise DictionaryError('{}: missing key(s) {}.'.format(path, ', '.join(missing)))
    obj.setdefault('other_disease_terms', {})
    term_lists = [('organ_terms', obj['organ_terms']), ('negation_terms', obj['negation_terms'])]
    for key in ('disease_terms', 'other_disease_terms'):
        if not isinstance(obj[key], dict):
            raise DictionaryError('{}: {} must map names to term lists.'.format(path, key))
        term_lists += sorted(obj[key].items())
    for name, terms in term_lists:
        if not isinstance(terms, list) or not all(isinstance(t, str) for t in terms):
            raise DictionaryError('{}: term set {!r} must be a list of strings.'.format(path, name))
    return RuleDictionary(obj['organ_terms'], obj['disease_terms'],
        obj['negation_terms'], obj['other_disease_terms'])

# ---- file formats ----
def read_corpus(path):
    '''Read a JSON-lines corpus of {"subject_id", "scan_id", "text"} objects.'''
    reports = []
    with open(path, encoding='utf-8') as f:
        for lineno, line in enumerate(f, 1):
            if not line.strip():
                continue
            obj = json.loads(line)
            try:
                subject_id, scan_id, text = obj['subject_id'], obj['scan_id'], obj['text']
            except (KeyError, TypeError):
                raise ValueError('{}:{}: a report needs subject_id, scan_id and text.'.format(path, lineno))
            if text is not None and not isinstance(text, str):
                raise ValueError('{}:{}: text must be a string.'.format(path, lineno))
            reports.append(Report(str(subject_id), str(scan_id), text))
    logger.debug('read %d reports from %s', len(reports), path)
    return reports

def write_corpus(reports, path):
    with open(path, 'w', encoding='utf-8', newline='\n') as f:
        for report in reports:
            obj = {'subject_id': report.subject_id, 'scan_id': report.scan_id, 'text': report.text}
            f.write(json.dumps(obj, ensure_ascii=False) + '\n')

def write_labels(labels, path):
    '''Write the labels CSV (booleans as 0/1, rows in input order).'''
    frame = pandas.DataFrame(
        numpy.array([label.flags for label in labels], dtype=numpy.int64).reshape(-1, len(COLUMNS)),
        columns=list(COLUMNS))
    frame.insert(0, 'scan_id', [label.scan_id for label in labels])
    frame.to_csv(path, index=False)
