import os
import math
import logging
from pathlib import Path
import yaml
from .utils import as_key
from .errors import ConfigError, UsageError

logger = logging.getLogger(__name__)

THREADS_ENV = 'COOCCUR_LAB_THREADS'

DEFAULTS = {
    # paths
    'corpus': None, 'dict': None, 'manifest': None, 'scores': None,
    'splits': None, 'population': None, 'classifier': None,
    'input': None, 'output': None, 'out': None, 'out_dir': None, 'matrix': None,
    # run parameters
    'seed': None, 'resamples': 2000, 'level': 0.95,
    'task': None, 'target': None, 'stratify': None, 'subset': 'test',
    'fractions': (0.70, 0.15, 0.15), 'spacing': (2.0, 2.0, 2.0), 'normalize': True,
    'workers': 1, 'threads': 0,
}
PATH_KEYS = ('corpus', 'dict', 'manifest', 'scores', 'splits', 'population',
             'classifier', 'input', 'output', 'out', 'out_dir', 'matrix')


def threads_from_env():
    '''Thread cap from COOCCUR_LAB_THREADS (0 or unset: automatic).'''
    value = os.environ.get(THREADS_ENV, '').strip()
    if value == '':
        return 0
    try:
        threads = int(value)
    except ValueError:
        raise ConfigError('{} must be an integer, got {!r}.'.format(THREADS_ENV, value))
    if threads < 0:
        raise ConfigError('{} must be >= 0, got {}.'.format(THREADS_ENV, threads))
    return threads


def _number(value, kind, key):
    if isinstance(value, bool) or not isinstance(value, (int, float, str)):
        raise ConfigError('{} must be a number, got {!r}.'.format(key, value))
    try:
        number = kind(value)
    except ValueError:
        raise ConfigError('{} must be a number, got {!r}.'.format(key, value))
    if kind is int and isinstance(value, float) and number != value:
        raise ConfigError('{} must be an integer, got {!r}.'.format(key, value))
    return number

def _triple(value, key):
    '''three floats from a list or tuple'''
    if isinstance(value, (str, bytes)) or not isinstance(value, (list, tuple)) or len(value) != 3:
        raise ConfigError('{} must be a list of three numbers, got {!r}.'.format(key, value))
    return tuple(_number(x, float, key) for x in value)


class PipelineConfig(object):
    '''Effective settings of one pipeline step.

    Values are layered: DEFAULTS, then the COOCCUR_LAB_THREADS environment
    variable, then a YAML file, then command-line flags. A later layer only
    overrides the keys it actually sets.'''
    def __init__(self, **values):
        self._values = dict(DEFAULTS)
        self._values['threads'] = threads_from_env()
        self.update(values)

    def __repr__(self):
        return 'PipelineConfig({})'.format(', '.join(
            '{}={!r}'.format(k, v) for k, v in sorted(self._values.items()) if v is not None))

    def __getattr__(self, name):
        values = self.__dict__.get('_values', {})
        if name in values:
            return values[name]
        raise AttributeError(name)

    def update(self, values):
        '''Override settings with the non-None entries of values.'''
        for key, value in values.items():
            key = key.replace('-', '_')
            if key not in DEFAULTS:
                raise ConfigError('unknown configuration key {!r}.'.format(key))
            if value is not None:
                self._values[key] = value
        return self

    def validate(self):
        '''Check the value ranges and normalize numeric settings in place;
        raises ConfigError.'''
        v = self._values
        if v['seed'] is not None:
            try:
                as_key(v['seed'])
            except (TypeError, ValueError) as err:
                raise ConfigError('seed: {}'.format(err))
        if isinstance(v['resamples'], bool) or not isinstance(v['resamples'], int) or v['resamples'] < 100:
            raise ConfigError('resamples must be an integer >= 100, got {!r}.'.format(v['resamples']))
        v['level'] = _number(v['level'], float, 'level')
        if not 0.0 < v['level'] < 1.0:
            raise ConfigError('level must lie in (0, 1), got {!r}.'.format(v['level']))
        v['fractions'] = _triple(v['fractions'], 'fractions')
        if min(v['fractions']) < 0 or abs(sum(v['fractions']) - 1.0) > 1e-9:
            raise ConfigError('fractions must be three non-negative numbers summing to 1, got {}.'.format(v['fractions']))
        v['spacing'] = _triple(v['spacing'], 'spacing')
        if not all(math.isfinite(s) and s > 0 for s in v['spacing']):
            raise ConfigError('spacing must be three positive numbers, got {}.'.format(v['spacing']))
        v['workers'] = _number(v['workers'], int, 'workers')
        if v['workers'] < 1:
            raise ConfigError('workers must be >= 1, got {}.'.format(v['workers']))
        v['threads'] = _number(v['threads'], int, 'threads')
        if v['threads'] < 0:
            raise ConfigError('threads must be >= 0, got {}.'.format(v['threads']))
        for key in ('task', 'target', 'stratify', 'subset'):
            if v[key] is not None and not isinstance(v[key], str):
                raise ConfigError('{} must be a string, got {!r}.'.format(key, v[key]))
        for key in PATH_KEYS:
            if v[key] is not None and not isinstance(v[key], (str, os.PathLike)):
                raise ConfigError('{} must be a path, got {!r}.'.format(key, v[key]))
        if not isinstance(v['normalize'], bool):
            raise ConfigError('normalize must be true or false, got {!r}.'.format(v['normalize']))
        return self

    def require(self, *keys):
        '''Values of required settings; a missing one is a usage error.'''
        missing = [key for key in keys if self._values.get(key) is None]
        if missing:
            raise UsageError('missing required setting(s): {}.'.format(
                ', '.join('--' + key.replace('_', '-') for key in missing)))
        return [self._values[key] for key in keys]

    def require_inputs(self, *keys):
        '''Paths of required input files, which must exist.'''
        paths = [Path(p) for p in self.require(*keys)]
        for path in paths:
            if not path.exists():
                raise FileNotFoundError('input file {} does not exist.'.format(path))
        return paths

    def as_dict(self):
        out = {}
        for key, value in self._values.items():
            if isinstance(value, tuple):
                value = list(value)
            elif key in PATH_KEYS and value is not None:
                value = str(value)
            out[key] = value
        return out

    def dump(self):
        return yaml.safe_dump(self.as_dict(), sort_keys=True, default_flow_style=None)


def load_config(path):
    '''Read a YAML configuration file into a dict of settings.'''
    with open(path, 'r', encoding='utf-8') as f:
        try:
            obj = yaml.safe_load(f)
        except yaml.YAMLError as err:
            raise ConfigError('{}: {}'.format(path, err))
    if obj is None:
        return {}
    if not isinstance(obj, dict):
        raise ConfigError('{}: a configuration file must hold a mapping.'.format(path))
    out = {}
    for key, value in obj.items():
        key = str(key).replace('-', '_')
        if key not in DEFAULTS:
            raise ConfigError('{}: unknown configuration key {!r}.'.format(path, key))
        out[key] = value
    return out
