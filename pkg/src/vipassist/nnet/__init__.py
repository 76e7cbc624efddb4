"""Small float64 network library: MLP and recurrent nets with exact gradients.

Everything trains through the same three pieces: a NetworkSpec describing the
architecture, a flat Parameters vector, and gradients()/adam_step() driving
updates. No autograd, no framework; backprop is written out per architecture
and checked against finite differences in the tests.
"""
from .core import ARCHS, OUTPUT_ACTIVATIONS, NetworkSpec, Parameters, init, shape_table, zeros_like
from .compute import Runner, backward_batch, forward, forward_batch, gradients, gru_cell, head_pre_grad
from .adam import AdamState, adam_step
from .serialize import WeightLoadError, load, save

__all__ = [
    "ARCHS",
    "OUTPUT_ACTIVATIONS",
    "NetworkSpec",
    "Parameters",
    "init",
    "shape_table",
    "zeros_like",
    "Runner",
    "backward_batch",
    "forward",
    "forward_batch",
    "gradients",
    "gru_cell",
    "head_pre_grad",
    "AdamState",
    "adam_step",
    "WeightLoadError",
    "load",
    "save",
]
