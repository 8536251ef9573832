"""Filtered approximate nearest-neighbour search over a two-level proximity graph."""
from .bench import BenchRow, TuneResult, autotune_efs, run_sweep, write_csv
from .build import BuildParams, build
from .core import Dataset, DistanceCounter, DistanceKind, cosine_distance, distance, l2_squared
from .errors import DomainError, FiltannError, FormatError, StorageError, UsageError
from .graph import AdjacencyStore, Layer, TwoLevelGraph
from .oracle import GroundTruth, brute_force_knn, recall
from .prefilter import (All, IdLessThan, IdRange, LabelEquals, MaskFile, RandomSample, Semimask, evaluate,
                        global_selectivity, local_selectivity, parse_predicate, read_mask, write_mask)
from .search import (Heuristic, SearchCounters, SearchParams, SearchResult, Searcher, SearchState,
                     choose_fixed, esv, knn_search)
from .storage import DiskIndex, IndexManifest, load, load_graph, persist, save_graph
from .workload import (Correlation, WorkloadSpec, correlation_ce, gen_correlated_mask, gen_queries,
                       gen_synthetic, load_dataset, load_fvecs, save_dataset, write_fvecs)

__version__ = "0.1.0"
