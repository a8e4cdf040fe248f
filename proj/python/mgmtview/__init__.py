"""Python bindings for the mgmtview C++ core.

Volumes are numpy arrays indexed [i, j, k] in voxel order; 2D planes are
indexed [y, x]. Affines map voxel indices to LPS millimetres.
"""

from ._core import (
    ConfigError,
    DegenerateLabelsError,
    FormatError,
    MgmtError,
    NoTumorError,
    TruncationError,
    UnsupportedTypeError,
    __version__,
    bootstrap_ci,
    compare,
    confusion_metrics,
    evaluate,
    extract,
    feret_diameter,
    gen_phantom,
    generate_phantom,
    martin_diameter,
    permutation_test_auc,
    preprocess,
    read_nifti,
    reorient_to_lps,
    resample_to_grid,
    resolved_config,
    roc_auc,
    select_slice,
    train,
    tumor_area,
    write_nifti,
    zscore,
)

__all__ = [name for name in dir() if not name.startswith("_")] + ["__version__"]
