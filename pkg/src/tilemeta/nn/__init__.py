from .layers import Conv2D, Dense, LSTMCell
from .losses import bce, clamp_probs, entropy_of_logits, log_softmax, mse, policy_entropy, softmax
from .network import FORMAT_VERSION, Network, build_layer, decode_array, encode_array, layer_from_dict, layer_to_dict
from .optim import RMSPropLike, Schedule, SGD, clip_global_norm

__all__ = [
    "Conv2D",
    "Dense",
    "LSTMCell",
    "bce",
    "clamp_probs",
    "entropy_of_logits",
    "log_softmax",
    "mse",
    "policy_entropy",
    "softmax",
    "FORMAT_VERSION",
    "Network",
    "build_layer",
    "decode_array",
    "encode_array",
    "layer_from_dict",
    "layer_to_dict",
    "RMSPropLike",
    "Schedule",
    "SGD",
    "clip_global_norm",
]
