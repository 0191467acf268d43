# Sphinx configuration for the rapidrisk docs. Build with:
#
#   sphinx-build -b html docs/source docs/build
#
import toml

extensions = [
    "autoapi.extension",
    "sphinx.ext.autodoc",
    "sphinx.ext.napoleon",
    "sphinx.ext.mathjax",
]

templates_path = ["_templates"]
source_suffix = ".rst"
master_doc = "index"

project = "rapidrisk"
copyright = "2024, Chris Larabee"
author = "Chris Larabee"

# Single source of truth for the version:
with open("../../pyproject.toml", "r") as r:
    pyproject = toml.load(r)

release = pyproject["tool"]["poetry"]["version"]
version = ".".join(release.split(".")[:2])

language = "en"
exclude_patterns = ["_build"]
pygments_style = "sphinx"

html_theme = "sphinx_rtd_theme"
html_static_path = ["_static"]
htmlhelp_basename = "rapidriskdoc"

man_pages = [(master_doc, "rapidrisk", "rapidrisk Documentation", [author], 1)]

autoapi_dirs = ["../../rapidrisk"]
autoapi_ignore = ["*/cli.py"]
autodoc_typehints = "description"
autoapi_python_class_content = "both"
autoapi_options = [
    "members",
    "undoc-members",
    "show-module-summary",
]
napoleon_google_docstring = True
napoleon_numpy_docstring = False
