"""Two-phase screening of retinal fundus images.

Phase one classifies whole images as obviously abnormal or worth a closer
look using tile statistics and Naive Bayes. Phase two extracts small
candidate regions from the images that pass, for specific lesion detectors.
"""

from .bayes import ClassLabel, NaiveBayesModel, Prediction, load_model, predict, save_model, train
from .config import RunConfig
from .features import FeatureMode, FeatureSpec, extract_features
from .prefilter import AnatomyMasks, CandidateRegion, PrefilterParams, prefilter_image
from .preprocess import prefilter_preprocess, prescreen_preprocess
from .selection import backward_elimination

__all__ = [
    "AnatomyMasks",
    "CandidateRegion",
    "ClassLabel",
    "FeatureMode",
    "FeatureSpec",
    "NaiveBayesModel",
    "PrefilterParams",
    "Prediction",
    "RunConfig",
    "backward_elimination",
    "extract_features",
    "load_model",
    "predict",
    "prefilter_image",
    "prefilter_preprocess",
    "prescreen_preprocess",
    "save_model",
    "train",
]
