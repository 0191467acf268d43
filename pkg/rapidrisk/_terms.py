# All the keys rapidrisk writes into reports, record tables and schema files are
# listed here. If a name ever changes, it changes here and every module that
# reads or writes it follows.

# Schema file keys:
COLUMNS = "columns"
NAME = "name"
KIND = "kind"
LEVELS = "levels"
ROLE = "role"
# Column kinds and roles:
CATEGORICAL = "categorical"
CONTINUOUS = "continuous"
QI = "qi"
SENSITIVE = "sensitive"
UNUSED = "unused"
# Evaluation modes and policies:
ALL_RECORDS = "all_records"
HOLDOUT = "holdout"
BASELINE_FULL = "full"
BASELINE_TARGET = "target"
BASELINE_TRAINING_FOLDS = "training_folds"
# Result keys:
SCORE = "score"
N_AT_RISK = "n_at_risk"
N_EVALUATED = "n_evaluated"
TAU = "tau"
EPSILON = "epsilon"
METRIC = "metric"
DELTA = "delta"
MODE = "mode"
BASELINE = "baseline"
ATTACKER = "attacker"
FAMILY = "family"
ACCURACY = "accuracy"
MAE = "mae"
TARGET_KIND = "target_kind"
INTERVALS = "intervals"
# Per-record table columns:
ROW = "row"
TRUE_VALUE = "true_value"
PREDICTION = "prediction"
G = "g"
B = "b"
R = "r"
E = "e"
AT_RISK = "at_risk"
REPLICATE = "replicate"
# Report sections:
TOOL = "tool"
VERSION = "version"
INPUTS = "inputs"
SHA256 = "sha256"
CONFIG = "config"
RESULTS = "results"
ENVELOPE = "envelope"
REPLICATES = "replicates"
TIMING = "timing"
SECONDS = "wall_clock_seconds"
# Curve and sweep columns:
THRESHOLD = "threshold"
SCORE_MIN = "score_min"
SCORE_MAX = "score_max"
KAPPA = "kappa"
REP = "rep"
RAPID = "rapid"
MEAN_RAPID = "mean_rapid"
SD = "sd"
MEAN_ACCURACY = "mean_accuracy"
# Attribution columns:
TERM = "term"
ESTIMATE = "estimate"
STD_ERROR = "std_error"
Z = "z"
LOG_ODDS = "log_odds"
