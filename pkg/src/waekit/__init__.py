"""Weighted-average ensembles for binary image classifiers.

Exhaustive weight-grid search, a complete binary evaluation suite (confusion
matrix, per-class and support-weighted precision/recall/F1, ROC, AUC), seeded
affine image augmentation, and a numpy classification head for frozen
backbone features.
"""

__version__ = "0.1.0"

from .core import (  # noqa: E402
    AlignedPredictions,
    Label,
    PredictionRecord,
    PredictionSet,
    align,
    label_from_score,
    labels_from_scores,
)
from .errors import (  # noqa: E402
    AlignmentError,
    ContractError,
    DegenerateInputError,
    DomainError,
    FormatError,
    LabelConflictError,
    ParseError,
    UnsupportedArityError,
    WaeError,
)
from .metrics import (  # noqa: E402
    ClassificationReport,
    ClassMetrics,
    ConfusionCounts,
    RocCurve,
    accuracy,
    as_percent,
    auc,
    class_metrics,
    classification_report,
    confusion,
    evaluate_scores,
    report_from_counts,
    roc_curve,
    weighted_average,
)
from .ensemble import (  # noqa: E402
    SearchResult,
    WeightVector,
    combine,
    enumerate_weight_grid,
    search,
)
