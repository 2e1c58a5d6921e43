# -*- coding: utf-8 -*-
#
# adagcn documentation build configuration file.

import sys, os

# If extensions (or modules to document with autodoc) are in another directory,
# add these directories to sys.path here.
sys.path.insert(0, os.path.abspath('..'))

extensions = ['sphinx.ext.autodoc']

templates_path = ['_templates']

source_suffix = '.rst'

master_doc = 'index'

project = u'adagcn'

version = '0.1'
release = '0.1.0'

exclude_trees = ['_build']

pygments_style = 'sphinx'

html_theme = 'default'

html_static_path = []

htmlhelp_basename = 'adagcndoc'
