from .birnn import BiRnnEncoder, RnnCell, encode_sequence
from .gradcheck import max_relative_error
from .io import load_arrays, save_arrays
from .layers import Conv2D, Dense, Flatten, MaxPool2D, Relu, ShapeError, \
    cross_entropy, softmax
from .network import REFERENCE_SHAPE_CHAIN, CnnFeatureExtractor, \
    build_extractor_layers, flow_to_grid, flows_to_grids, scaled_dims

__all__ = [
    "BiRnnEncoder", "RnnCell", "encode_sequence", "max_relative_error",
    "load_arrays", "save_arrays", "Conv2D", "Dense", "Flatten", "MaxPool2D",
    "Relu", "ShapeError", "cross_entropy", "softmax", "REFERENCE_SHAPE_CHAIN",
    "CnnFeatureExtractor", "build_extractor_layers", "flow_to_grid",
    "flows_to_grids", "scaled_dims",
]
