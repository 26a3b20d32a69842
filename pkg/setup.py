try:
    from setuptools import setup, find_packages
except ImportError:
    from distutils.core import setup, find_packages

from pathlib import Path


def readme(root_path):
    """Returns the text content of the README.md of the package
    Parameters
    ----------
    root_path : pathlib.Path
        path to the root of the package
    """
    with root_path.joinpath('README.md').open(encoding='UTF-8') as f:
        return f.read()


root_path = Path(__file__).parent
README = readme(root_path)


config = {
    'name': 'cooccurlab',
    'packages': find_packages(exclude=['doc', 'examples', 'examples.*']),
    'package_data': {'cooccurlab': ['data/*.json']},
    'description': 'Weakly supervised CT labels and co-occurrence-stratified evaluation',
    'long_description': README,
    'long_description_content_type' : 'text/markdown',
    'author': 'author names', #'version': VERSION,
    'python_requires': '>=3.9',
    'install_requires': ['numpy', 'numba', 'scipy', 'pandas', 'pyyaml'],
    'extras_require': {'test': ['pytest']},
    'license': 'Modified BSD',
    'entry_points': {'console_scripts': ['cooccurlab = cooccurlab.cli:main']},
    'classifiers': [
        'Topic :: Scientific/Engineering :: Medical Science Apps.',
        'License :: OSI Approved :: BSD License',
        'Programming Language :: Python :: 3'
    ],
}

setup(**config)
