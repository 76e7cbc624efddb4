"""Network descriptions and flat parameter storage.

Weights for every architecture live in one flat float64 array addressed
through a named shape table (row-major). Gate matrices are stored stacked:
GRU keeps (z, r) in one matrix plus the candidate pair, LSTM keeps
(input, forget, output, cell) in one. The table layout is the serialization
contract, so its construction below is deliberately explicit.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

ARCHS = ("mlp", "rnn", "lstm", "gru")
OUTPUT_ACTIVATIONS = ("tanh", "linear", "sigmoid")


@dataclass(frozen=True)
class NetworkSpec:
    arch: str
    input_dim: int
    hidden_dims: tuple[int, ...]
    output_dim: int
    output_activation: str = "tanh"

    def __post_init__(self) -> None:
        object.__setattr__(self, "arch", str(self.arch).lower())
        object.__setattr__(self, "hidden_dims", tuple(int(h) for h in self.hidden_dims))
        if self.arch not in ARCHS:
            raise ValueError(f"unsupported architecture {self.arch!r}")
        if self.output_activation not in OUTPUT_ACTIVATIONS:
            raise ValueError(f"unsupported output activation {self.output_activation!r}")
        if self.input_dim < 1 or self.output_dim < 1 or any(h < 1 for h in self.hidden_dims):
            raise ValueError("all dimensions must be >= 1")
        if self.recurrent and not self.hidden_dims:
            raise ValueError("recurrent networks need at least one hidden layer")

    @property
    def recurrent(self) -> bool:
        return self.arch != "mlp"


def shape_table(spec: NetworkSpec) -> tuple[tuple[str, int, int], ...]:
    """Named (rows, cols) extents, in flat-storage order."""
    entries: list[tuple[str, int, int]] = []
    if spec.arch == "mlp":
        dims = (spec.input_dim, *spec.hidden_dims, spec.output_dim)
        for i, (a, b) in enumerate(zip(dims[:-1], dims[1:])):
            entries.append((f"W{i}", b, a))
            entries.append((f"b{i}", 1, b))
        return tuple(entries)
    d = spec.input_dim
    for layer, h in enumerate(spec.hidden_dims):
        if spec.arch == "rnn":
            entries += [(f"Wx{layer}", h, d), (f"Uh{layer}", h, h), (f"bh{layer}", 1, h)]
        elif spec.arch == "gru":
            entries += [
                (f"Wzr{layer}", 2 * h, d), (f"Uzr{layer}", 2 * h, h), (f"bzr{layer}", 1, 2 * h),
                (f"Wc{layer}", h, d), (f"Uc{layer}", h, h), (f"bc{layer}", 1, h),
            ]
        else:  # lstm; stacked gate order (i, f, o, g)
            entries += [(f"Wg{layer}", 4 * h, d), (f"Ug{layer}", 4 * h, h), (f"bg{layer}", 1, 4 * h)]
        d = h
    entries += [("Wy", spec.output_dim, d), ("by", 1, spec.output_dim)]
    return tuple(entries)


class Parameters:
    """Flat float64 weight vector plus the named shape table addressing it."""

    __slots__ = ("data", "table", "_index")

    def __init__(self, data: np.ndarray, table: tuple[tuple[str, int, int], ...]):
        table = tuple((str(n), int(r), int(c)) for n, r, c in table)
        total = sum(r * c for _, r, c in table)
        data = np.ascontiguousarray(data, dtype=np.float64)
        if data.ndim != 1 or data.size != total:
            raise ValueError(
                f"flat data length {data.size} does not match shape table total {total}"
            )
        index: dict[str, tuple[int, int, int]] = {}
        offset = 0
        for name, r, c in table:
            if name in index:
                raise ValueError(f"duplicate shape-table name {name!r}")
            index[name] = (offset, r, c)
            offset += r * c
        self.data = data
        self.table = table
        self._index = index

    def __getitem__(self, name: str) -> np.ndarray:
        offset, r, c = self._index[name]
        return self.data[offset : offset + r * c].reshape(r, c)

    def __setitem__(self, name: str, value) -> None:
        self[name][...] = value

    def __contains__(self, name: str) -> bool:
        return name in self._index

    def __len__(self) -> int:
        return self.data.size

    def copy(self) -> "Parameters":
        return Parameters(self.data.copy(), self.table)


def init(spec: NetworkSpec, seed) -> Parameters:
    """Seeded Glorot-uniform weights (per stored matrix), zero biases."""
    table = shape_table(spec)
    rng = np.random.default_rng(seed)
    chunks = []
    for name, r, c in table:
        if name.startswith("b"):
            chunks.append(np.zeros(r * c))
        else:
            lim = math.sqrt(6.0 / (r + c))
            chunks.append(rng.uniform(-lim, lim, size=r * c))
    return Parameters(np.concatenate(chunks), table)


def zeros_like(params: Parameters) -> Parameters:
    return Parameters(np.zeros_like(params.data), params.table)
