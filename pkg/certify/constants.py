INVALID_REQUEST = "INVALID_REQUEST"
COMPUTATION_ERROR = "COMPUTATION_ERROR"

# Artifact format
DOCUMENT_VERSION = 1
ARTIFACT_VERSION = "1.0.0"

# Bound names, in the column order of the report tables
FO = "FO"
C1 = "C1"
C2 = "C2"
CTD = "CTD"
TND = "TND"
DIS = "DIS"
ALL_BOUNDS = (FO, C1, C2, CTD, TND, DIS)
BINARY_ONLY_BOUNDS = (C1, C2, DIS)
OPTIMIZABLE_BOUNDS = (FO, TND, DIS)

KL_FORM = "kl"
LAMBDA_FORM = "lambda"

FULL_BAGGING = "full"
REDUCED_BAGGING = "reduced"
BAGGING_MODES = (FULL_BAGGING, REDUCED_BAGGING)

# kl inversion
KL_INV_TOLERANCE = 1e-12
KL_INV_MAX_ITER = 100

# Tree growth
GINI_TOLERANCE = 1e-12
MAX_TREE_NODES = 10**6

# Posterior validation
PROBABILITY_TOLERANCE = 1e-10

# iRProp+
IRPROP_ETA_PLUS = 1.2
IRPROP_ETA_MINUS = 0.5
IRPROP_DELTA_ZERO = 0.1
IRPROP_DELTA_MIN = 1e-6
IRPROP_DELTA_MAX = 50.0

# Alternating minimization
STALL_ITERATIONS = 10
MAX_INNER_ITERATIONS = 1000
MAX_OUTER_ITERATIONS = 10**4
CONVERGENCE_TOLERANCE = 1e-9

# Dataset formats
LIBSVM_FORMAT = "libsvm"
CSV_FORMAT = "csv"
DATASET_FORMATS = (LIBSVM_FORMAT, CSV_FORMAT)
MISSING_TOKENS = frozenset({"", "?", "NA", "nan", "NaN"})

# Recorded run kinds
TRAIN_RUN = "train"
BOUNDS_RUN = "bounds"
OPTIMIZE_RUN = "optimize"
EXPERIMENT_RUN = "experiment"
RUN_KINDS = [
    (TRAIN_RUN, "Train"),
    (BOUNDS_RUN, "Bounds"),
    (OPTIMIZE_RUN, "Optimize"),
    (EXPERIMENT_RUN, "Experiment"),
]
