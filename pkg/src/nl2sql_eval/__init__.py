"""Execution-based evaluation harness for modular NL2SQL systems.

The pipeline has three stages, each a CLI subcommand:

* ``postprocess`` -- judge generated SQL against gold SQL by sandboxed
  execution and score selected schemas against gold schemas.
* ``bench`` -- compute outcome rates, schema precision/recall/F1,
  Pass@k, revision-transition metrics, efficiency, and cost.
* ``report`` -- render machine, CSV, markdown, and plot-data files.
"""

__version__ = "0.1.0"
