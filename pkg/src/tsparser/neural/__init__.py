from .layers import EmptyUtterance, LSTMParams, ShapeMismatch, StackNode, StackUnderflow, encode_utterance, lstm_step
from .model import CheckpointError, ModelConfig, ParserModel
from .optim import MomentumSGD, sgd_step
from .tensor import Tensor, no_grad
