"""Class-fair one-sided matching: mechanisms, audits, bounds and a Monte Carlo harness."""

from .audit import AuditReport, audit, check_cef1, check_class_envy_free, check_mcef1, check_non_wasteful
from .core_graph import ClassMatcher, Instance, Matching, assignment_valuation, max_weight_matching_of_size
from .distributions import Exponential, PdfBounded, ReversedExponential, Seed, Uniform01
from .mechanisms import (
    envy_graph_mechanism,
    greedy_house_allocation,
    max_weight_mechanism,
    round_robin,
    run_mechanism,
)

__version__ = "0.1.0"
