"""Context-free multilanguages: grammars whose strings carry parse counts.

The package keeps exact multiplicities (arbitrary-precision, with a
distinct infinite value) through multiset algebra, grammar analysis,
normal-form transformations, and transductions.
"""

from .counts import INF, Count, count_from_str, count_to_str
from .errors import (CfmlError, ContractViolation, GrammarError,
                     GrammarTextError, InternalError, ParseForestError)
from .grammar import (EPSILON, Grammar, ParseForest, ParseNode, Production,
                      SymString, Symbol, make_grammar, nonterm,
                      parse_grammar_text, render_grammar_text, term,
                      verify_parse)
from .multiset import Multiset, canonical_key, render_multiset
from .semantics import (CircularityReport, OracleCapExceeded,
                        analyze_circularity, circular_nonterminals,
                        cocircular_classes, count_derivations, count_parses,
                        enumerate_language, left_recursive_set,
                        nullable_counts, nullable_set, oracle_bounds,
                        oracle_count_parses, oracle_stability_bound)
from .transforms import (TransformResult, abbreviate, apply_pipeline,
                         binarize, chomsky_normal_form, eliminate,
                         eliminate_epsilons, expand_rule, expand_start,
                         greibach_normal_form, localize_circularity,
                         merge_cocircular, reduce_grammar,
                         remove_left_recursion)

__version__ = "0.1.0"
