import os
from pathlib import Path

from dotenv import load_dotenv

load_dotenv()

# Skeleton (COCO-18 as emitted by OpenPose)
NUM_JOINTS = 18
NECK = 1
RIGHT_HIP = 8
LEFT_HIP = 11

# Ingest
CONF_THRESHOLD = 0.0       # 0 -> only exact (0, 0) positions count as missing
MIN_FPS = 24.0
MAX_FPS = 60.0
DEGENERATE_TOL = 1e-12     # neck closer than this to the hip/neck centroid is unusable

# Frequency binning
REF_FPS = 25.0
N_FFT = 1000               # 0.025 Hz per coefficient at 25 fps
CUTOFF_HZ = 6.0
BIN_C = 1.00264            # best c for 25 fps videos
BIN_B0 = 1
ROUND_LIMIT = 3.0          # widths below this are rounded, above it ceiled
NUM_CHANNELS = 2           # x, y

# Graph
PARTITION_STRATEGY = "spatial"
ROOT_JOINT = NECK

# Network
CHANNELS = [32, 64]
STRIDES = [1, 2]
KERNEL_SIZE = 3
DROPOUT = 0.5
ATTENTION_VARIANT = 2
NUM_CLASSES = 2
BN_MOMENTUM = 0.1          # torch convention: running = 0.9 * running + 0.1 * batch
BN_EPS = 1e-5

# Optimisation
MAX_EPOCHS = 500
LR_DECAY_FACTOR = 0.1
LR_DECAY_PERIOD = 100
ADAM_BETAS = (0.9, 0.999)
ADAM_EPS = 1e-8
DEFAULT_SEED = 0

PRESETS = {
    "mini_rgbd_like": {"batch_size": 1, "base_lr": 1e-4},
    "rvi38_like": {"batch_size": 4, "base_lr": 1e-3},
}
DEFAULT_PRESET = "mini_rgbd_like"

# Labels: abnormal is the positive class
LABELS = ["normal", "abnormal"]
NORMAL = 0
ABNORMAL = 1

# Robustness
NOISE_LEVELS = [0.15, 0.30, 0.60, 1.20]
NOISE_SEEDS = list(range(10))

# Baselines
BASELINE_KINDS = ["logistic_regression", "lda", "decision_tree", "linear_svm"]
LR_LAMBDA = 1e-2
LR_TOL = 1e-6
LDA_SHRINKAGE = 0.1
TREE_MAX_DEPTH = 3
TREE_MIN_LEAF = 1
SVM_LAMBDA = 1e-2
SVM_ITERATIONS = 10_000

# c search
C_GRID = [1.001, 1.002, 1.00264, 1.005, 1.01]

# Runtime (overridable from the environment / .env)
DATA_DIR = Path(os.getenv("FREQGCN_DATA_DIR", "./data"))
WORKERS = int(os.getenv("FREQGCN_WORKERS", "1"))
LOG_FILE = os.getenv("FREQGCN_LOG_FILE", "")
TORCH_THREADS = int(os.getenv("FREQGCN_TORCH_THREADS", "1"))

# File format versions
SEQUENCE_FORMAT_VERSION = 1
FEATURES_FORMAT_VERSION = 1
CHECKPOINT_FORMAT_VERSION = 1
REPORT_FORMAT_VERSION = 1
