from .graph import INPUT, TIME, Graph, Node, Tape, backward, forward
from .layers import LayerSpec
from .losses import mse_loss
from .optim import Adam, sgd_step
from .params import DTYPES, Parameter, ParameterSet, Tensor, ensure_finite
