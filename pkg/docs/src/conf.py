"""Sphinx configuration of the DIF documentation."""

import os
import sys

sys.path.insert(0, os.path.abspath("../../src"))

# -- General configuration ------------------------------------------------

extensions = [
    "sphinx.ext.autodoc",
    "sphinx.ext.doctest",
    "sphinx.ext.intersphinx",
    "sphinx_autodoc_typehints",
    "sphinxcontrib.mermaid",
    "sphinxarg.ext",
    "recommonmark",
]

# Type hints go into the parameter descriptions, in short form
autodoc_typehints = "description"
autodoc_typehints_format = "short"

autodoc_default_options = {
    "member-order": "bysource",
}

source_suffix = [".rst", ".md"]
master_doc = "index"

project = "Decentralised Identity Federation (DIF)"
copyright = "2026, DIF developers"  # pylint: disable=redefined-builtin
author = "DIF developers"

version = "0.1.0"
release = "0.1.0"

language = "en"
exclude_patterns: list[str] = []
pygments_style = "sphinx"

# -- Options for HTML output ----------------------------------------------

html_theme = "ska_ser_sphinx_theme"

# -- Cross references -----------------------------------------------------

intersphinx_mapping = {
    "python": ("https://docs.python.org/3.10/", None),
    "simpy": ("https://simpy.readthedocs.io/en/latest/", None),
    "h5py": ("https://docs.h5py.org/en/stable/", None),
    "cryptography": ("https://cryptography.io/en/latest/", None),
}

nitpicky = True

nitpick_ignore = [("py:class", "simpy.core.Environment")]
