# -*- coding: utf-8 -*-
#
# Sphinx configuration for the python-headmodel documentation.
# Build with build_pyhead_docs.sh from this directory.

import os
import sys

# The package lives one level up from docs/
sys.path.insert(0, os.path.dirname(os.getcwd()))

# -- General configuration ------------------------------------------------

extensions = [
    'sphinx.ext.autodoc',
    'sphinx.ext.mathjax',
]

templates_path = ['_templates']
source_suffix = '.rst'
master_doc = 'index'

project = 'python-headmodel'
copyright = '2016, Bruno Stuyts'
author = 'Bruno Stuyts'
version = '0.1.0'
release = 'v0.1.0'

language = None
exclude_patterns = ['_build']
pygments_style = 'sphinx'
todo_include_todos = False

# Members are documented in source order so that the validation dictionaries sit next to their functions
autodoc_member_order = 'bysource'

# -- Options for HTML output ----------------------------------------------

html_theme = 'sphinxdoc'
html_static_path = ['_static']
htmlhelp_basename = 'python-headmodeldoc'

# -- Options for other builders -------------------------------------------

numfig = False

latex_elements = {}
latex_documents = [
    (master_doc, 'python-headmodel.tex', 'python-headmodel Documentation', author, 'manual'),
]

man_pages = [
    (master_doc, 'python-headmodel', 'python-headmodel Documentation', [author], 1),
]

texinfo_documents = [
    (master_doc, 'python-headmodel', 'python-headmodel Documentation', author, 'python-headmodel',
     'Parametric head models, head pose fitting and head detection utilities.', 'Miscellaneous'),
]
