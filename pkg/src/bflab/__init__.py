"""Bohman-Frieze / Erdos-Renyi phase-transition laboratory.

Subpackages:

* :mod:`bflab.process`     exact two-choice process simulation
* :mod:`bflab.ode`         component-density ODEs, susceptibility, critical point
* :mod:`bflab.singularity` characteristic curves and generating-function singularity
* :mod:`bflab.experiments` Monte Carlo ensembles vs deterministic predictions
* :mod:`bflab.cli`         command-line entry point
"""

__version__ = "0.1.0"

from .process import ProcessRule, new_process  # noqa: F401
