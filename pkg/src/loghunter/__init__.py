"""Threat hunting over network-log datasets: columnar ingest, class
rebalancing, a from-scratch random-forest tactic classifier, and a streaming
connector for incremental batch training."""

from ._version import __version__
from .balance import (BalancePlan, BalanceTrace, apply_plan, builtin_plan,
                      load_plan, random_oversample, remove_small_classes,
                      smote, undersample)
from .encode import (EncodingMap, FeatureMatrix, amalgamate_binary,
                     encode_table, encode_with_map, ipv4_to_u32, one_hot,
                     to_epoch, u32_to_ipv4)
from .errors import (DataError, LogHunterError, SchemaMismatchError,
                     UnsupportedFormatError, UsageError)
from .evaluate import (ConfusionMatrix, EvaluationReport, confusion_matrix,
                       metrics, repeated_holdout, split_train_test)
from .forest import (ForestConfig, ForestModel, Tree, best_split, extend,
                     gini, load_model, maybe_drop_batch, predict,
                     predict_batch, save_model, train)
from .ingest import (SynthSpec, collate, read_csv, read_parquet, read_table,
                     synthesize, write_csv, write_parquet)
from .profiles import builtin_profile, builtin_profiles
from .schema import (ClassRegistry, ColumnSpec, DatasetProfile, LogTable,
                     class_histogram, load_profile, make_table, tables_equal,
                     validate_table)

__all__ = [name for name in dir() if not name.startswith("_")]
