from .errors import (
    CooccurLabError, DictionaryError, DuplicateScanIdError, MissingSubjectError,
    EmptyManifestError, UnknownClassError, DegenerateClassError,
    InsufficientResamplesError, InvalidSpecError, VolumeFormatError, ConfigError, UsageError)
from .rba import (
    Report, RuleDictionary, LabelVector, TARGETS, COLUMNS,
    segment_sentences, match_sentence, evidence, label_report, label_corpus,
    label_vector, load_dictionary, read_corpus, write_corpus, write_labels)
from .cohort import (
    Manifest, SplitAssignment, CooccurrenceTree,
    build_manifest, split_subjects, select_split, build_cooccurrence_tree, cooccurrence_matrix,
    read_manifest, write_manifest, read_splits, write_splits, write_tree)
from .metrics import (
    Truth, TaskSpec, ScoreRecord, EvalResult,
    task_spec, derive_task_labels, auc, bootstrap_ci, evaluate, evaluate_all,
    stratified_eval, stratified_table, read_scores, write_scores, write_eval)
from .simcls import (
    PopulationSpec, ClassifierSpec,
    sample_population, simulate_scores, expected_auc, load_population, load_classifier)
from .volprep import (
    Volume, resample, clip_normalize, preprocess, read_rvol, write_rvol)
from .config import PipelineConfig
from .cli import run
