"""Epoch files, preprocessing and the synthetic population generator"""
from uqnet.data.epochs import EpochSet, RecordingHeader, decode_epochset, encode_epochset, load_epochset, save_epochset
from uqnet.data.preprocess import RawRecording, TrialEvent, exponential_moving_standardize, preprocess
from uqnet.data.source import load_source
from uqnet.data.synthetic import synthesize_population

__all__ = [
    "EpochSet",
    "RawRecording",
    "RecordingHeader",
    "TrialEvent",
    "decode_epochset",
    "encode_epochset",
    "exponential_moving_standardize",
    "load_epochset",
    "load_source",
    "preprocess",
    "save_epochset",
    "synthesize_population",
]
