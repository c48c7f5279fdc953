"""Synthesis toolkit for run-to-completion reactive controllers.

The package models environments as deterministic labelled transition
systems with controlled and monitored actions, expresses goals in a
safety/recurrence fragment of fluent linear temporal logic, reduces
run-to-completion control to standard turn-taking control, solves the
resulting generalized-reactivity game, and checks any claimed controller
independently of the solver.
"""

__version__ = "0.1.0"

from .errors import ToolError, UsageError, ModelError, SpecError, ParseError

__all__ = ["ToolError", "UsageError", "ModelError", "SpecError", "ParseError",
           "__version__"]
