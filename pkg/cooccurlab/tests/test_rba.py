import time
import json
import numpy as np
import pandas as pd
import pytest

from ..rba import (Report, RuleDictionary, LabelVector, COLUMNS, TARGETS,
    segment_sentences, match_sentence, evidence, label_report, label_corpus,
    label_vector, load_dictionary, read_corpus, write_corpus, write_labels)
from ..errors import DictionaryError, DuplicateScanIdError, UnknownClassError

# (report text, positive names); an empty tuple means no apparent disease
GOLDEN = [
    ('Small nodule in the right upper lobe.', ('nodule',)),
    ('There is a 4 mm nodule in the left lower lobe. Mild emphysema in both lungs.', ('nodule', 'emphysema')),
    ('No pleural effusion.', ()),
    ('Bilateral pleural effusions with bibasilar atelectasis.', ('atelectasis', 'effusion')),
    ('The lungs are clear.', ()),
    ('Centrilobular emphysema of the upper lobes. No nodules.', ('emphysema',)),
    ('Atelectasis at the lung bases.', ('atelectasis',)),
    ('Nodule in the thyroid gland.', ()),
    ('Liver cyst noted. Lungs are clear.', ()),
    ('Pulmonary nodules, multiple, stable.', ('nodule',)),
    ('Left lower lobe consolidation compatible with pneumonia.', ('other',)),
    ('Right pleural effusion has resolved.', ()),
    ('Subsegmental atelectatic changes in the lingula.', ('atelectasis',)),
    ('Emphysematous changes throughout the lung parenchyma with a small right effusion.', ('emphysema', 'effusion')),
    ('Read by A. Smith. Nodular opacity in the right upper lobe.', ('nodule', 'other')),
    ('Without evidence of pleural effusion or pulmonary nodule.', ()),
    ('Free of pneumothorax. Small left pleural effusion.', ('effusion',)),
    ('Mild bibasilar atelectasis and trace bilateral pleural effusions. Scattered pulmonary nodules. '
     'Paraseptal emphysema in the lung apices.', ('atelectasis', 'nodule', 'emphysema', 'effusion')),
    ('Heart size is normal. Mediastinum unremarkable.', ()),
    ('Emphysema.', ()),
    ('Calcified granuloma in the right lower lobe.', ('other',)),
    ('Negative for pulmonary embolism. Small lung nodule.', ('nodule',)),
    ('Lobar atelectasis of the right middle lobe.\nSmall effusion in the left hemithorax.', ('atelectasis', 'effusion')),
    ('Large right-sided hydrothorax within the pleural space.', ('effusion',)),
    ('There is not any nodule in the lungs.', ()),
    ('Ground-glass opacities in both lungs. Micronodules in the lung apices.', ('nodule', 'other')),
    ('Nodules are seen in the liver. Pleural thickening.', ('other',)),
    ('Atelectases in the lower lobes?  Possibly.', ('atelectasis',)),
    ('Subpleural emphysema.', ()),
    ('Pulmonary emphysema, bilateral pleural effusions, and a right lung nodule; no atelectasis.', ()),
]


def golden_reports():
    return [Report('s{:02d}'.format(i // 2), 'c{:02d}'.format(i), text) for i, (text, _) in enumerate(GOLDEN)]

def test_golden_corpus():
    dictionary = load_dictionary()
    start = time.time()
    labels = label_corpus(golden_reports(), dictionary)
    assert time.time() - start < 1.0
    for (text, truth), label in zip(GOLDEN, labels):
        assert label == label_vector(label.scan_id, *truth), text

def test_segment_sentences():
    assert segment_sentences('') == []
    assert segment_sentences('No nodule. Mild emphysema.') == ['No nodule', 'Mild emphysema']
    assert segment_sentences('Seen by J. Doe. Stable!  Why?\n\nDone') == ['Seen by J. Doe', 'Stable', 'Why', 'Done']

    ### A synthetic report with 50 sentences
    rng = np.random.default_rng(0)
    words = ['lung', 'nodule', 'is', 'stable', 'mild', 'the', 'lobe', '4', 'mm']
    text = ''
    for i in range(50):
        sentence = ' '.join(rng.choice(words, size=rng.integers(1, 8)))
        text += sentence + rng.choice(['. ', '.\n', '! ', '? ', '\n'])
    assert len(segment_sentences(text)) == 50

def test_match_sentence():
    dictionary = load_dictionary()
    assert match_sentence('There is a nodule in the right lobe', dictionary) == {'nodule'}
    assert match_sentence('No nodule in the lung', dictionary) == set()
    assert match_sentence('Nodule noted', dictionary) == set()
    assert match_sentence('NODULES   in the\tLUNG', dictionary) == {'nodule'}
    assert match_sentence('Lung without nodule', dictionary) == set()
    assert match_sentence('Lung mass', dictionary) == {'other'}

def test_match_sentence_random():
    ### Independent oracle of the organ + disease + no-negation rule on single-word terms
    organs = ['lung', 'lobe', 'pleura']
    diseases = {'atelectasis': ['atelectasis'], 'nodule': ['nodule', 'nodular'],
                'emphysema': ['emphysema'], 'effusion': ['effusion']}
    negations = ['no', 'without']
    others = {'mass': ['mass']}
    dictionary = RuleDictionary(organs, diseases, negations, others)
    filler = ['there', 'is', 'a', 'small', 'right', 'left', 'in', 'the', 'stable', 'liver']
    vocabulary = organs + negations + filler + ['mass'] + [t for ts in diseases.values() for t in ts]
    rng = np.random.default_rng(1)
    for _ in range(1000):
        words = list(rng.choice(vocabulary, size=rng.integers(1, 10)))
        sentence = ' '.join(w.capitalize() if rng.random() < 0.2 else w for w in words)
        if any(w in negations for w in words) or not any(w in organs for w in words):
            truth = set()
        else:
            truth = {name for name, ts in diseases.items() if any(w in ts for w in words)}
            if 'mass' in words:
                truth.add('other')
        assert match_sentence(sentence, dictionary) == truth, sentence

def test_negation_cues_exact():
    ### Negation cues take no plural suffix: "notes" is not "not", "NOS" is not "no"
    dictionary = load_dictionary()
    assert match_sentence('Right lung nodule, see prior notes', dictionary) == {'nodule'}
    assert match_sentence('Pulmonary nodule NOS', dictionary) == {'nodule'}
    assert match_sentence('Right lung nodule, see prior report', dictionary) == {'nodule'}
    assert match_sentence('Right lung nodule, not changed', dictionary) == set()

def test_negation_dominates():
    ### A leading negation cancels every finding of a positive sentence
    dictionary = load_dictionary()
    sentences = [s for text, _ in GOLDEN for s in segment_sentences(text)]
    positive = [s for s in sentences if match_sentence(s, dictionary)]
    assert len(positive) >= 15
    rng = np.random.default_rng(3)
    organs = sorted(dictionary.organ_terms)
    terms = sorted(t for ts in dictionary.disease_terms.values() for t in ts)
    for _ in range(200):
        words = [rng.choice(['small', 'mild', 'right', 'left', 'stable']), rng.choice(terms), 'in the', rng.choice(organs)]
        positive.append(' '.join(words))
    for sentence in positive:
        assert match_sentence(sentence, dictionary), sentence
        for cue in ('No', 'Without', 'Negative for'):
            assert match_sentence(cue + ' ' + sentence, dictionary) == set(), sentence

def test_label_monotone():
    ### Appending a sentence never clears a disease flag
    dictionary = load_dictionary()
    texts = [text for text, _ in GOLDEN]
    rng = np.random.default_rng(4)
    for i in range(300):
        a, b = rng.choice(texts, size=2)
        before = label_report(Report('s', 'c', a), dictionary).flags[:-1]
        after = label_report(Report('s', 'c', a + '\n' + b), dictionary).flags[:-1]
        assert np.all(after | ~before), (a, b)

def test_word_boundary():
    ### Disease terms match whole words only, in any case
    dictionary = load_dictionary()
    for name, terms in dictionary.disease_terms.items():
        for term in terms:
            assert name in match_sentence('Right lung ' + term.upper(), dictionary), term
            assert match_sentence('Right lung inter' + term, dictionary) == set(), term
            assert match_sentence('Right lung ' + term + 'ity', dictionary) == set(), term
    assert match_sentence('Internodule septa of the lung', dictionary) == set()

def test_evidence():
    dictionary = load_dictionary()
    assert evidence('Small nodule in the right upper lobe', dictionary) == {'nodule': ('lobe', 'nodule')}
    assert evidence('Lung cyst', dictionary) == {'other': ('lung', 'cyst')}
    assert evidence('No nodule in the lung', dictionary) == {}

def test_label_report():
    dictionary = load_dictionary()
    label = label_report(Report('s1', 'c1', 'No nodule. Atelectasis in the left lung.'), dictionary)
    assert label.atelectasis and not (label.nodule or label.emphysema or label.effusion)
    assert not label.other_disease and not label.no_apparent_disease
    label = label_report(Report('s2', 'c2', 'Normal study of the chest.'), dictionary)
    assert label.no_apparent_disease and label.positives() == ()
    label = label_report(Report('s3', 'c3', 'Lung nodule. Hepatic cyst noted.'), dictionary)
    assert label == label_vector('c3', 'nodule')
    label = label_report(Report('s4', 'c4', None), dictionary)
    assert label.no_apparent_disease

def test_label_corpus():
    dictionary = load_dictionary()
    assert label_corpus([], dictionary) == []
    reports = [Report('s1', 'c1', 'No nodule. Atelectasis in the left lung.'),
               Report('s2', 'c2', 'Normal study of the chest.')]
    assert label_corpus(reports, dictionary) == [label_vector('c1', 'atelectasis'), label_vector('c2')]
    with pytest.raises(DuplicateScanIdError):
        label_corpus(reports + [Report('s3', 'c1', '')], dictionary)

def test_label_corpus_workers():
    ### Output does not depend on the number of worker processes
    dictionary = load_dictionary()
    rng = np.random.default_rng(2)
    texts = [text for text, _ in GOLDEN]
    reports = [Report('s{}'.format(i), 'c{}'.format(i), ' '.join(rng.choice(texts, size=3))) for i in range(400)]
    serial = label_corpus(reports, dictionary, workers=1)
    assert label_corpus(reports, dictionary, workers=1) == serial
    assert label_corpus(reports, dictionary, workers=3) == serial

def test_label_vector():
    label = label_vector('c1', 'nodule', 'emphysema')
    assert list(label.flags) == [False, True, True, False, False, False]
    assert label.positives() == ('nodule', 'emphysema')
    assert label_vector('c2', 'other_disease').other_disease
    assert label_vector('c3').no_apparent_disease
    with pytest.raises(UnknownClassError):
        label_vector('c4', 'pneumonia')
    with pytest.raises(ValueError):
        LabelVector('c5', [True, False, False, False, False, True])
    with pytest.raises(ValueError):
        LabelVector('c6', [False] * 6)

def test_rule_dictionary():
    diseases = {name: [name] for name in TARGETS}
    dictionary = RuleDictionary(['lung'], diseases, ['no'])
    assert match_sentence('lung nodule', dictionary) == {'nodule'}
    assert RuleDictionary(**load_dictionary().to_json()).to_json() == load_dictionary().to_json()
    with pytest.raises(DictionaryError):
        RuleDictionary(['lung'], {'nodule': ['nodule']}, ['no'])
    with pytest.raises(DictionaryError):
        RuleDictionary(['lung'], dict(diseases, mass=['mass']), ['no'])
    with pytest.raises(DictionaryError):
        RuleDictionary(['Lung'], diseases, ['no'])
    with pytest.raises(DictionaryError):
        RuleDictionary(['lung'], diseases, ['no', 'nodule'])
    with pytest.raises(DictionaryError):
        RuleDictionary(['lung'], diseases, ['no'], {'mass': []})

def test_load_dictionary(tmp_path):
    shipped = load_dictionary().to_json()
    (tmp_path / 'lung.json').write_text(json.dumps(shipped))
    assert load_dictionary(tmp_path / 'lung.json').to_json() == shipped
    ### Wrongly typed term maps and term sets
    for key, value in [('disease_terms', ['nodule']), ('other_disease_terms', 'mass'),
                       ('organ_terms', 'lung'), ('negation_terms', {'no': 1}),
                       ('disease_terms', dict(shipped['disease_terms'], nodule='nodule')),
                       ('disease_terms', dict(shipped['disease_terms'], nodule=[['nodule']]))]:
        (tmp_path / 'bad.json').write_text(json.dumps(dict(shipped, **{key: value})))
        with pytest.raises(DictionaryError):
            load_dictionary(tmp_path / 'bad.json')

def test_corpus_files(tmp_path):
    reports = golden_reports()
    write_corpus(reports, tmp_path / 'reports.jsonl')
    loaded = read_corpus(tmp_path / 'reports.jsonl')
    assert [(r.subject_id, r.scan_id, r.text) for r in loaded] == [(r.subject_id, r.scan_id, r.text) for r in reports]

    labels = label_corpus(loaded, load_dictionary())
    write_labels(labels, tmp_path / 'labels.csv')
    frame = pd.read_csv(tmp_path / 'labels.csv', dtype={'scan_id': str})
    assert list(frame.columns) == ['scan_id'] + list(COLUMNS)
    assert list(frame['scan_id']) == [label.scan_id for label in labels]
    assert np.array_equal(frame[list(COLUMNS)].to_numpy(), np.array([label.flags for label in labels], dtype=int))

    (tmp_path / 'bad.jsonl').write_text('{"subject_id": "s1", "scan_id": "c1", "text": "ok"}\n{"scan_id": "c2"}\n')
    with pytest.raises(ValueError, match=':2:'):
        read_corpus(tmp_path / 'bad.jsonl')
