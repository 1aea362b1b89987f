"""Dataset manifests, splitting, image preprocessing and batching."""

from diacnn.datapipe.image import (
    AugmentConfig,
    ImageDecodeError,
    PreprocessConfig,
    augment,
    decode_image,
    gaussian_blur,
    histogram_equalize,
    normalize01,
    preprocess,
    resize,
)
from diacnn.datapipe.loader import ArraySplits, ImageSplits, batch_iter
from diacnn.datapipe.manifest import (
    ODIR_CLASSES,
    ODIR_COUNTS,
    Dataset,
    ManifestError,
    Sample,
    binary_task_filter,
    load_manifest,
    split_dataset,
    write_manifest,
)
from diacnn.datapipe.prng import XorShift64Star, derive_seed

__all__ = [
    "ArraySplits",
    "AugmentConfig",
    "Dataset",
    "ImageDecodeError",
    "ImageSplits",
    "ManifestError",
    "ODIR_CLASSES",
    "ODIR_COUNTS",
    "PreprocessConfig",
    "Sample",
    "XorShift64Star",
    "augment",
    "batch_iter",
    "binary_task_filter",
    "decode_image",
    "derive_seed",
    "gaussian_blur",
    "histogram_equalize",
    "load_manifest",
    "normalize01",
    "preprocess",
    "resize",
    "split_dataset",
    "write_manifest",
]
