import sys
import logging
import argparse
from pathlib import Path
import pandas
from .utils import derive_seed, set_threads
from .errors import CooccurLabError, UsageError
from .config import PipelineConfig, load_config
from .rba import TARGETS, read_corpus, load_dictionary, label_corpus, write_labels
from .cohort import (read_manifest, write_manifest, build_manifest, split_subjects,
    select_split, build_cooccurrence_tree, cooccurrence_matrix, write_tree,
    read_splits, write_splits, SPLITS)
from .metrics import (MLCL_CLASSES, task_spec, task_truth, evaluate, evaluate_all,
    stratified_table, read_scores, write_scores, write_eval, Truth)
from .simcls import load_population, load_classifier, sample_population, simulate_scores
from .volprep import read_rvol, write_rvol, preprocess

logger = logging.getLogger('cooccurlab')

COMMANDS = ('label', 'cooccur', 'split', 'tasks', 'eval', 'simulate', 'preprocess')
_TRUTH_NAMES = {int(Truth.POSITIVE): 'positive', int(Truth.NEGATIVE): 'negative', int(Truth.EXCLUDED): 'excluded'}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write('{}: error: {}\n'.format(self.prog, message))
        raise UsageError(message)


def build_parser():
    common = _Parser(add_help=False)
    common.add_argument('--config', help='YAML file of settings (flags take precedence)')
    verbosity = common.add_mutually_exclusive_group()
    verbosity.add_argument('--verbose', '-v', action='store_true', help='debug logging')
    verbosity.add_argument('--quiet', '-q', action='store_true', help='warnings and errors only')
    parser = _Parser(prog='cooccurlab',
        description='Weak-supervision labels, cohort splits and co-occurrence-stratified evaluation for chest CT.')
    sub = parser.add_subparsers(dest='command', metavar='COMMAND')
    sub.required = True

    p = sub.add_parser('label', parents=[common], help='label a report corpus with the rule dictionary')
    p.add_argument('--corpus', help='JSON-lines reports')
    p.add_argument('--dict', help='rule dictionary JSON (default: shipped lung dictionary)')
    p.add_argument('--out', help='labels CSV')
    p.add_argument('--manifest', help='also write a manifest CSV')
    p.add_argument('--workers', type=int, help='worker processes')

    p = sub.add_parser('cooccur', parents=[common], help='co-occurrence tree of unique subjects')
    p.add_argument('--manifest')
    p.add_argument('--out', help='tree JSON')
    p.add_argument('--matrix', help='also write the pairwise co-occurrence matrix CSV')

    p = sub.add_parser('split', parents=[common], help='subject-level stratified split')
    p.add_argument('--manifest')
    p.add_argument('--out', help='split CSV')
    p.add_argument('--seed', type=int)
    p.add_argument('--fractions', type=float, nargs=3, metavar='F')

    p = sub.add_parser('tasks', parents=[common], help='task ground truth of every scan')
    p.add_argument('--manifest')
    p.add_argument('--task', type=str.upper, help='MLCL, BCL, BNCL or BNNCL')
    p.add_argument('--target')
    p.add_argument('--out', help='CSV (default: standard output)')

    p = sub.add_parser('eval', parents=[common], help='AUC with bootstrap confidence intervals')
    p.add_argument('--manifest', help='manifest CSV (default: manifest.csv)')
    p.add_argument('--scores', help='scores CSV (default: scores.csv)')
    p.add_argument('--task', type=str.upper)
    p.add_argument('--target')
    p.add_argument('--splits', help='split CSV; restricts evaluation to --subset')
    p.add_argument('--subset', choices=SPLITS)
    p.add_argument('--stratify', choices=TARGETS, metavar='TARGET', help='co-occurrence-stratified table of TARGET')
    p.add_argument('--seed', type=int)
    p.add_argument('--resamples', type=int)
    p.add_argument('--level', type=float)
    p.add_argument('--out', help='CSV (default: standard output)')

    p = sub.add_parser('simulate', parents=[common], help='synthetic population and classifier scores')
    p.add_argument('--population', help='PopulationSpec JSON (default: shipped)')
    p.add_argument('--classifier', help='ClassifierSpec JSON (default: shipped shortcut classifier)')
    p.add_argument('--seed', type=int, help='overrides the seeds of both specs')
    p.add_argument('--out-dir', dest='out_dir')

    p = sub.add_parser('preprocess', parents=[common], help='resample, clip and normalize an RVOL volume')
    p.add_argument('--input')
    p.add_argument('--output')
    p.add_argument('--spacing', type=float, nargs=3, metavar='S')
    p.add_argument('--no-normalize', dest='normalize', action='store_false', default=None)
    return parser

def _configure_logging(args):
    level = logging.DEBUG if args.verbose else logging.WARNING if args.quiet else logging.INFO
    for handler in list(logger.handlers):
        logger.removeHandler(handler)
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(logging.Formatter('%(levelname)s %(name)s: %(message)s'))
    logger.addHandler(handler)
    logger.setLevel(level)
    logger.propagate = False

def _seed(cfg):
    return 0 if cfg.seed is None else cfg.seed

# ---- subcommands ----
def cmd_label(cfg):
    (corpus,) = cfg.require_inputs('corpus')
    (out,) = cfg.require('out')
    dictionary = load_dictionary(cfg.require_inputs('dict')[0] if cfg.dict is not None else None)
    reports = read_corpus(corpus)
    workers = int(cfg.workers)
    if cfg.threads > 0:
        workers = min(workers, int(cfg.threads))
    labels = label_corpus(reports, dictionary, workers=workers)
    write_labels(labels, out)
    if cfg.manifest is not None:
        manifest = build_manifest(labels, {r.scan_id: r.subject_id for r in reports})
        write_manifest(manifest, cfg.manifest)

def cmd_cooccur(cfg):
    (path,) = cfg.require_inputs('manifest')
    (out,) = cfg.require('out')
    manifest = read_manifest(path)
    tree = build_cooccurrence_tree(manifest)
    write_tree(tree, out)
    logger.info('%d subjects in %d co-occurrence nodes', tree.N, len(tree))
    if cfg.matrix is not None:
        frame = pandas.DataFrame(cooccurrence_matrix(manifest), index=list(TARGETS), columns=list(TARGETS))
        frame.to_csv(cfg.matrix, index_label='disease')

def cmd_split(cfg):
    (path,) = cfg.require_inputs('manifest')
    (out,) = cfg.require('out')
    manifest = read_manifest(path)
    assignment = split_subjects(manifest, cfg.fractions, derive_seed(_seed(cfg), 'split'))
    write_splits(assignment, out)
    for stratum in ('normal', 'diseased'):
        logger.info('%s subjects: %s', stratum, assignment.sizes(stratum))

def cmd_tasks(cfg):
    (path,) = cfg.require_inputs('manifest')
    (kind,) = cfg.require('task')
    manifest = read_manifest(path)
    if kind.upper() == 'MLCL' and cfg.target is None:
        tasks = [task_spec(kind, target) for target in MLCL_CLASSES]
    else:
        tasks = [task_spec(kind, cfg.target)]
    frame = pandas.DataFrame({'scan_id': list(manifest.scan_ids)})
    for task in tasks:
        frame[task.target_name] = [_TRUTH_NAMES[v] for v in task_truth(manifest, task).tolist()]
    frame.to_csv(sys.stdout if cfg.out is None else cfg.out, index=False)

def cmd_eval(cfg):
    if cfg.manifest is None:
        cfg.update({'manifest': 'manifest.csv'})
    if cfg.scores is None:
        cfg.update({'scores': 'scores.csv'})
    manifest_path, scores_path = cfg.require_inputs('manifest', 'scores')
    manifest = read_manifest(manifest_path)
    if cfg.splits is not None:
        assignment = read_splits(cfg.require_inputs('splits')[0])
        manifest = select_split(manifest, assignment, cfg.subset)
        logger.info('evaluating %d %s scans', len(manifest), cfg.subset)
    scores = read_scores(scores_path)
    seed = derive_seed(_seed(cfg), 'bootstrap')
    if cfg.stratify is not None:
        results = stratified_table(scores, manifest, cfg.stratify, cfg.level, cfg.resamples, seed,
            task='MLCL' if cfg.task is None else cfg.task)
    else:
        (kind,) = cfg.require('task')
        if cfg.target is not None or kind.upper() != 'MLCL':
            results = [evaluate(scores, manifest, task_spec(kind, cfg.target), cfg.level, cfg.resamples, seed)]
        else:
            results = evaluate_all(scores, manifest, kind, cfg.level, cfg.resamples, seed)
    for result in results:
        logger.info('%s', result)
    write_eval(results, sys.stdout if cfg.out is None else cfg.out)

def cmd_simulate(cfg):
    (out_dir,) = cfg.require('out_dir')
    population = load_population(cfg.require_inputs('population')[0] if cfg.population is not None else None)
    classifier = load_classifier(cfg.require_inputs('classifier')[0] if cfg.classifier is not None else None)
    if cfg.seed is not None:
        population.seed = derive_seed(cfg.seed, 'population')
        classifier.seed = derive_seed(cfg.seed, 'classifier')
    logger.info('%s', population)
    logger.info('%s', classifier)
    manifest = sample_population(population)
    scores = simulate_scores(manifest, classifier)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    write_manifest(manifest, out_dir / 'manifest.csv')
    write_scores(scores, out_dir / 'scores.csv')

def cmd_preprocess(cfg):
    (path,) = cfg.require_inputs('input')
    (out,) = cfg.require('output')
    volume = read_rvol(path)
    result = preprocess(volume, cfg.spacing, normalize=cfg.normalize)
    logger.info('%s -> %s', volume, result)
    write_rvol(result, out)

_COMMANDS = {'label': cmd_label, 'cooccur': cmd_cooccur, 'split': cmd_split, 'tasks': cmd_tasks,
             'eval': cmd_eval, 'simulate': cmd_simulate, 'preprocess': cmd_preprocess}

# ---- entry points ----
def run(argv=None):
    '''Run one pipeline step.

    Parameters:
    argv: list of str - arguments without the program name.

    Returns:
    code: int - 0 on success, 1 on a usage or validation error, 2 on an
        I/O error.'''
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError:
        return 1
    except SystemExit as err: # --help
        return err.code if isinstance(err.code, int) else 0
    _configure_logging(args)
    try:
        cfg = PipelineConfig()
        if args.config is not None:
            cfg.update(load_config(args.config))
        flags = {k: v for k, v in vars(args).items() if k not in ('command', 'config', 'verbose', 'quiet')}
        cfg.update(flags).validate()
        logger.info('%s configuration:\n%s', args.command, cfg.dump().rstrip())
        set_threads(cfg.threads)
        _COMMANDS[args.command](cfg)
    except UsageError as err:
        parser.print_usage(sys.stderr)
        logger.error('%s', err)
        return 1
    except (CooccurLabError, ValueError) as err:
        logger.error('%s', err)
        return 1
    except OSError as err:
        logger.error('%s', err)
        return 2
    return 0

def main():
    sys.exit(run(sys.argv[1:]))
