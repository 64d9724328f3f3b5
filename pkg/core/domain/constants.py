"""Centralized constants for rein-seg.

This module contains the application constants to avoid magic numbers and strings
scattered throughout the codebase.
"""

# Backbone defaults (desk scale)
DEFAULT_BACKBONE_KIND = "vit_tiny"
DEFAULT_BACKBONE_LAYERS = 12
DEFAULT_BACKBONE_WIDTH = 64
DEFAULT_PATCH_SIZE = 8
DEFAULT_MLP_RATIO = 4
CONV_KERNEL_SIZE = 7

# Rein defaults
DEFAULT_NUM_TOKENS = 16
DEFAULT_TOKEN_RANK = 4
DEFAULT_QUERY_WIDTH = 32
TOKEN_INIT_SCALE = 0.02
QUERY_EMBED_STD = 0.02

# Head defaults
NUM_CLASS_LOGITS = 2  # foreground, no-object
FOREGROUND_CLASS = 0
DEFAULT_THRESHOLD = 0.5
SOFT_DICE_SMOOTH = 1.0

# Optimizer defaults
DEFAULT_WEIGHT_DECAY = 0.01
DEFAULT_BETAS = (0.9, 0.999)
DEFAULT_EPS = 1e-8
DEFAULT_GRAD_CLIP_NORM = 1.0
DEFAULT_LR_BACKBONE = 1e-5
DEFAULT_LR_REIN = 1e-4
DEFAULT_LR_HEAD = 1e-4

# Presets: iterations / batch size / crop size / generated image size / rates
PRESETS: dict[str, dict[str, float | int]] = {
    "paper": {
        "iterations": 60000,
        "batch_size": 4,
        "crop_size": 512,
        "image_size": 1500,
        "lr_backbone": DEFAULT_LR_BACKBONE,
        "lr_rein": DEFAULT_LR_REIN,
        "lr_head": DEFAULT_LR_HEAD,
    },
    "desk": {
        "iterations": 500,
        "batch_size": 8,
        "crop_size": 64,
        "image_size": 96,
        "lr_backbone": DEFAULT_LR_BACKBONE,
        "lr_rein": DEFAULT_LR_REIN,
        "lr_head": DEFAULT_LR_HEAD,
    },
}
DEFAULT_PRESET = "desk"

# Data protocol
DEFAULT_SPLIT_RATIO = 0.8
TRAIN_IMAGES = 180
PRELIM_TEST_IMAGES = 20
FINAL_TEST_IMAGES = 90
SEEN_DOMAINS = ("A", "B", "C")
UNSEEN_DOMAINS = ("D", "E", "F")
MIN_SHAPES = 1
MAX_SHAPES = 4
MAX_FOREGROUND_FRACTION = 0.9

# Dataset directory layout
IMAGES_DIRNAME = "images"
MASKS_DIRNAME = "masks"
DOMAINS_FILENAME = "domains.csv"
PROTOCOL_FILENAME = "protocol.json"
UNKNOWN_DOMAIN = "unknown"
MASK_FOREGROUND_VALUE = 255

# Run directory layout
CONFIG_SNAPSHOT_FILENAME = "config.json"
TRAIN_LOG_FILENAME = "train_log.csv"
LAST_CHECKPOINT_FILENAME = "last.ckpt"
BEST_CHECKPOINT_FILENAME = "best.ckpt"
NAN_DIAGNOSTICS_FILENAME = "nan_diagnostics.json"
RUN_LOG_FILENAME = "run.log"

# Checkpoint blob format
CHECKPOINT_MAGIC = b"REINCKPT"
CHECKPOINT_VERSION = 1
WEIGHT_INDEX_FILENAME = "index.txt"

# Reports
METRIC_CSV_HEADER = ("name", "dsc", "miou", "jsc", "score")
AGGREGATE_ROW_NAME = "AGGREGATE"
REPORT_DECIMALS = 6

# Logging Configuration
DEFAULT_LOG_LEVEL = "INFO"
DEFAULT_LOG_FORMAT = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"

# CLI exit codes
EXIT_OK = 0
EXIT_VALIDATION_ERROR = 1
EXIT_RUNTIME_ABORT = 2
