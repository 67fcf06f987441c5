# -*- coding: utf-8 -*-

import os

from setuptools import setup, find_packages
from shutil import copy2

try:
    with open('README.md', 'r') as fp:
        readme = fp.read()
except:
    readme = ""

setup_args = {
    'name': 'flatpt',
    'version': '0.1.0',
    'description': 'Trace-driven simulator of virtual address translation with flattened page tables',
    'long_description': readme,
    'long_description_content_type': 'text/markdown; charset=UTF-8',
    'author': 'flatpt developers',
    'author_email': '',
    'url': '',
    'license': 'BSD 3-Clause',
    'install_requires': [
        'hdmf>=3.1.1',
        'numpy>=1.17',
        'pandas>=1.3',
        'ruamel.yaml>=0.16'
    ],
    'packages': find_packages('src/python'),
    'package_dir': {'': 'src/python'},
    'package_data': {'flatpt': [
        'spec/flatpt.defaults.yaml',
    ]},
    'entry_points': {
        'console_scripts': ['flatpt=flatpt.cli:main'],
    },
    'classifiers': [
        "Intended Audience :: Developers",
        "Intended Audience :: Science/Research",
        "Topic :: System :: Hardware",
    ],
    'zip_safe': False
}


def _copy_spec_files(project_dir):
    defaults_path = os.path.join(project_dir, 'spec', 'flatpt.defaults.yaml')

    dst_dir = os.path.join(project_dir, 'src', 'python', 'flatpt', 'spec')
    if not os.path.exists(dst_dir):
        os.mkdir(dst_dir)

    copy2(defaults_path, dst_dir)


if __name__ == '__main__':
    _copy_spec_files(os.path.dirname(__file__))
    setup(**setup_args)
