"""Exact BDeu structure learning and sensitivity to the equivalent sample size."""

__version__ = "0.1.0"

from .analysis import (AlphaGrid, AlphaPosterior, SweepResult, SweepSummary,
                       candidate_set_from_sweep, compare_selections, integrate_out_alpha,
                       score_curves, select_alpha_star, summarize, sweep)
from .dag import Dag
from .data import (CategoricalDataset, ColumnOverride, PreprocessSpec, RawTable,
                   discretize_equal_width, encode, impute_random, load_csv, load_dataset)
from .equivalence import (EquivalenceKey, arc_count, equivalence_key,
                          same_independence_model, skeleton, v_structures)
from .errors import BnsensError, CapacityError, DataFormatError, DomainError, PreprocessError
from .scoring import (ArcDecomposition, SufficientStats, arc_delta, arc_gain,
                      arc_penalty_per_config, count_sufficient_stats, local_log_bdeu,
                      log_multinomial_beta, prequential_log_ml, total_log_bdeu)
from .search import (BestParentsTable, LocalScoreTable, SubsetCounts, best_order, best_parents,
                     brute_force_map, compute_local_score_table, learn_map, reconstruct_dag)
