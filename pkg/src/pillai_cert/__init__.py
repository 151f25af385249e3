"""Certified computation for ``U_n - b^m = c`` over linear recurrences.

Modules: ``rigor`` (ball arithmetic), ``sequence`` (recurrences, roots and
Binet form), ``search`` (brute force), ``heights`` (heights, Matveev,
Guzman-Luca), ``cfrac`` (continued fractions and Dujella-Petho reduction),
``pipeline`` (certificate) and ``cli``.
"""
from .rigor import BallReal, PrecisionExhausted, PrecisionPolicy, RigorError
from .sequence import FIBONACCI, PADOVAN, TRIBONACCI, RecurrenceSpec, term, terms
from .search import SearchConfig, enumerate_table, multi_represented
from .pipeline import Certificate, PipelineConfig, run_all, verify_certificate

__version__ = "0.1.0"

__all__ = [
    "BallReal", "PrecisionExhausted", "PrecisionPolicy", "RigorError",
    "FIBONACCI", "PADOVAN", "TRIBONACCI", "RecurrenceSpec", "term", "terms",
    "SearchConfig", "enumerate_table", "multi_represented",
    "Certificate", "PipelineConfig", "run_all", "verify_certificate",
]
