"""CRNN architecture family: spec type, validation, layout, size, grid, codecs.

An architecture is a point (input, n, r, k, p, m, dropout): k conv layers
whose filter counts shrink backwards from n by factor r (floored at 8), p
2x2 max-pools interleaved at the tail of the conv stack, then LSTM layers m
and a dropout rate. The family serializes to a canonical JSON descriptor
plus a compact network string.
"""

from __future__ import annotations

import json
import math
import re
import warnings
from dataclasses import dataclass

from ocrforge.lineimg import INPUT_CONFIGS, InputConfig, input_config

MIN_FILTERS = 8


class SpecValidationError(ValueError):
    """Invalid architecture point; message lists every violated rule."""


class StackedLstmWarning(UserWarning):
    """More than one LSTM layer: representable, but known to underperform."""


@dataclass(frozen=True)
class ArchitectureSpec:
    """One point of the architecture family (see module docstring)."""

    input: InputConfig
    n: int
    r: float
    k: int
    p: int
    m: tuple[int, ...] = (200,)
    dropout: float = 0.5

    def __post_init__(self):
        object.__setattr__(self, "m", tuple(self.m))


def validate(spec: ArchitectureSpec) -> list[str]:
    """All rule violations for an architecture spec; empty means valid.

    Emits StackedLstmWarning for multi-LSTM stacks (legal but flagged).
    """
    problems = []
    if spec.n < MIN_FILTERS:
        problems.append(f"n={spec.n} is below the filter floor {MIN_FILTERS}")
    if spec.r <= 1.0:
        problems.append(f"r={spec.r} must be > 1")
    if spec.k < 1:
        problems.append(f"k={spec.k} must be >= 1")
    if spec.p not in (0, 1, 2):
        problems.append(f"p={spec.p} must be 0, 1 or 2")
    elif spec.p > spec.k:
        problems.append(f"p={spec.p} exceeds the conv depth k={spec.k}")
    if spec.p in (1, 2) and spec.input.target_height % (2 ** spec.p) != 0:
        problems.append(f"input height {spec.input.target_height} is not "
                        f"divisible by 2^{spec.p}")
    if any(u < 1 for u in spec.m):
        problems.append("every LSTM width must be >= 1")
    if not 0.0 <= spec.dropout < 1.0:
        problems.append(f"dropout={spec.dropout} must be in [0, 1)")
    if len(spec.m) > 1:
        warnings.warn("stacked LSTMs degrade accuracy in this family",
                      StackedLstmWarning, stacklevel=3)
    return problems


def _validated(spec: ArchitectureSpec) -> ArchitectureSpec:
    problems = validate(spec)
    if problems:
        raise SpecValidationError("; ".join(problems))
    return spec


def filter_counts(n: int, r: float, k: int) -> list[int]:
    """Per-layer conv filter counts f_1..f_k.

    The last layer gets n; walking backwards each layer gets
    max(floor(next / r), 8). The sequence is non-decreasing.
    """
    if n < MIN_FILTERS:
        raise ValueError(f"n must be >= {MIN_FILTERS}")
    if r <= 1.0:
        raise ValueError("r must be > 1")
    if k < 1:
        raise ValueError("k must be >= 1")
    counts = [0] * k
    counts[-1] = n
    for i in range(k - 2, -1, -1):
        counts[i] = max(math.floor(counts[i + 1] / r), MIN_FILTERS)
    return counts


@dataclass(frozen=True)
class Layer:
    kind: str                      # "conv" | "pool" | "lstm"
    size: int = 0                  # filters or LSTM units
    kernel: tuple[int, int] = (0, 0)
    stride: tuple[int, int] = (1, 1)


@dataclass(frozen=True)
class LayerLayout:
    layers: tuple[Layer, ...]
    dropout: float


def layout(spec: ArchitectureSpec) -> LayerLayout:
    """Concrete layer sequence for a valid spec.

    Pools sit at the tail of the conv stack: with p = 1 after conv_k, with
    p = 2 additionally after conv_{k-1}.
    """
    _validated(spec)
    counts = filter_counts(spec.n, spec.r, spec.k)
    layers: list[Layer] = []
    for f in counts[:-1]:
        layers.append(Layer("conv", f, kernel=(3, 3)))
    if spec.p == 2:
        layers.append(Layer("pool", kernel=(2, 2), stride=(2, 2)))
    layers.append(Layer("conv", counts[-1], kernel=(3, 3)))
    if spec.p >= 1:
        layers.append(Layer("pool", kernel=(2, 2), stride=(2, 2)))
    for units in spec.m:
        layers.append(Layer("lstm", units))
    return LayerLayout(tuple(layers), spec.dropout)


def param_count(spec: ArchitectureSpec, codec_size: int) -> int:
    """Trainable parameter count for an architecture spec and codec size.

    Convs use 3x3 kernels plus bias; each pool halves the height; the
    flattened feature depth f_k * height / 2^p feeds the LSTM chain
    (4 * (u * (d + u) + u) parameters per layer); a dense head of
    units * codec_size + codec_size closes the network unless codec_size
    is 0, which omits the head.
    """
    _validated(spec)
    if codec_size < 0:
        raise ValueError("codec_size must be >= 0")
    counts = filter_counts(spec.n, spec.r, spec.k)
    total = 0
    c_in = 1
    for f in counts:
        total += 3 * 3 * c_in * f + f
        c_in = f
    d = counts[-1] * (spec.input.target_height // (2 ** spec.p))
    for units in spec.m:
        total += 4 * (units * (d + units) + units)
        d = units
    if codec_size > 0:
        total += d * codec_size + codec_size
    return total


def stock_architecture() -> ArchitectureSpec:
    """The traditional two-conv default this family generalizes."""
    return ArchitectureSpec(input_config("gray48"), n=128, r=2.0, k=2, p=2,
                            m=(200,), dropout=0.5)


def tuned_architecture() -> ArchitectureSpec:
    """The grid-search winner: 6 convs tapering to 124 filters, one pool."""
    return ArchitectureSpec(input_config("gray48"), n=124, r=1.5, k=6, p=1,
                            m=(650,), dropout=0.5)


@dataclass(frozen=True)
class SearchGrid:
    """Cartesian search space over (input, (n, r), k, p) with fixed m/dropout."""

    inputs: tuple[InputConfig, ...]
    widths: tuple[tuple[int, float], ...]
    k_values: tuple[int, ...]
    p_values: tuple[int, ...]
    m: tuple[int, ...] = (200,)
    dropout: float = 0.5

    def __post_init__(self):
        object.__setattr__(self, "inputs", tuple(dict.fromkeys(self.inputs)))
        object.__setattr__(self, "widths",
                           tuple(dict.fromkeys((int(n), float(r))
                                               for n, r in self.widths)))
        object.__setattr__(self, "k_values",
                           tuple(sorted(set(int(k) for k in self.k_values))))
        object.__setattr__(self, "p_values",
                           tuple(sorted(set(int(p) for p in self.p_values))))
        object.__setattr__(self, "m", tuple(self.m))
        if not (self.inputs and self.widths and self.k_values and self.p_values):
            raise ValueError("every grid dimension must be non-empty")

    def to_dict(self) -> dict:
        return {
            "schema": 1,
            "inputs": [c.name for c in self.inputs],
            "widths": [[n, _plain_number(r)] for n, r in self.widths],
            "k": list(self.k_values),
            "p": list(self.p_values),
            "m": list(self.m),
            "dropout": _plain_number(self.dropout),
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "SearchGrid":
        k = doc["k"]
        if isinstance(k, dict):
            k_values = tuple(range(int(k["min"]), int(k["max"]) + 1))
        else:
            k_values = tuple(int(v) for v in k)
        return cls(
            inputs=tuple(input_config(name) for name in doc["inputs"]),
            widths=tuple((int(n), float(r)) for n, r in doc["widths"]),
            k_values=k_values,
            p_values=tuple(int(p) for p in doc["p"]),
            m=tuple(int(u) for u in doc.get("m", [200])),
            dropout=float(doc.get("dropout", 0.5)),
        )


def default_search_grid() -> SearchGrid:
    """The full sweep space: 4 inputs x 6 widths x k in 2..15 x p in {1, 2}."""
    return SearchGrid(
        inputs=tuple(INPUT_CONFIGS[name]
                     for name in ("gray48", "bin48", "gray64", "bin64")),
        widths=((64, 1.5), (124, 1.5), (240, 1.5),
                (64, 2.0), (128, 2.0), (256, 2.0)),
        k_values=tuple(range(2, 16)),
        p_values=(1, 2),
    )


def grid_size(grid: SearchGrid) -> int:
    """Candidate count before validity filtering."""
    return (len(grid.inputs) * len(grid.widths)
            * len(grid.k_values) * len(grid.p_values))


def enumerate_grid(grid: SearchGrid) -> list[ArchitectureSpec]:
    """All valid specs of the grid, in deterministic lexicographic order.

    Order: input name, then (r, n), then k, then p, all ascending. Specs
    violating any family rule are dropped; the caller can count them as
    grid_size(grid) - len(result).
    """
    specs = []
    for cfg in sorted(grid.inputs, key=lambda c: c.name):
        for n, r in sorted(grid.widths, key=lambda wr: (wr[1], wr[0])):
            for k in grid.k_values:
                for p in grid.p_values:
                    spec = ArchitectureSpec(cfg, n=n, r=r, k=k, p=p,
                                            m=grid.m, dropout=grid.dropout)
                    with warnings.catch_warnings():
                        warnings.simplefilter("ignore", StackedLstmWarning)
                        if not validate(spec):
                            specs.append(spec)
    return specs


def _plain_number(x: float) -> int | float:
    """Render integral floats as ints so JSON round-trips byte-stable."""
    return int(x) if float(x).is_integer() else float(x)


def _format_number(x: float) -> str:
    return str(_plain_number(x))


def network_string(spec: ArchitectureSpec) -> str:
    """Compact colon-separated layer string (grammar in docs/network_string.md)."""
    counts = filter_counts(spec.n, spec.r, spec.k)
    tokens = [f"conv3x3,f={f}" for f in counts[:-1]]
    if spec.p == 2:
        tokens.append("pool2x2")
    tokens.append(f"conv3x3,f={counts[-1]}")
    if spec.p >= 1:
        tokens.append("pool2x2")
    tokens.extend(f"lstm{u}" for u in spec.m)
    if spec.dropout > 0:
        tokens.append(f"dropout{_format_number(spec.dropout)}")
    return ":".join(tokens)


_TOKEN_RES = {
    "conv": re.compile(r"^conv(\d+)x(\d+),f=(\d+)$"),
    "pool": re.compile(r"^pool(\d+)x(\d+)$"),
    "lstm": re.compile(r"^lstm(\d+)$"),
    "dropout": re.compile(r"^dropout(\d*\.?\d+)$"),
}


def parse_network_string(text: str) -> LayerLayout:
    """Parse a network string back into a layer layout."""
    layers: list[Layer] = []
    dropout = 0.0
    for token in text.split(":"):
        if m := _TOKEN_RES["conv"].match(token):
            layers.append(Layer("conv", int(m.group(3)),
                                kernel=(int(m.group(1)), int(m.group(2)))))
        elif m := _TOKEN_RES["pool"].match(token):
            ker = (int(m.group(1)), int(m.group(2)))
            layers.append(Layer("pool", kernel=ker, stride=ker))
        elif m := _TOKEN_RES["lstm"].match(token):
            layers.append(Layer("lstm", int(m.group(1))))
        elif m := _TOKEN_RES["dropout"].match(token):
            dropout = float(m.group(1))
        else:
            raise ValueError(f"unparseable layer token {token!r}")
    return LayerLayout(tuple(layers), dropout)


def descriptor(spec: ArchitectureSpec) -> dict:
    """Canonical JSON-ready description of a valid spec."""
    _validated(spec)
    return {
        "schema": 1,
        "input": spec.input.name,
        "n": spec.n,
        "r": _plain_number(spec.r),
        "k": spec.k,
        "p": spec.p,
        "m": list(spec.m),
        "dropout": _plain_number(spec.dropout),
        "filters": filter_counts(spec.n, spec.r, spec.k),
        "network": network_string(spec),
    }


def emit(spec: ArchitectureSpec) -> str:
    """Canonical JSON text for a spec; emit(parse(emit(s))) == emit(s)."""
    return json.dumps(descriptor(spec), sort_keys=True)


def parse(doc: str | dict) -> ArchitectureSpec:
    """Rebuild a spec from its JSON descriptor, checking derived fields."""
    if isinstance(doc, str):
        doc = json.loads(doc)
    spec = ArchitectureSpec(
        input=input_config(doc["input"]),
        n=int(doc["n"]),
        r=float(doc["r"]),
        k=int(doc["k"]),
        p=int(doc["p"]),
        m=tuple(int(u) for u in doc.get("m", [200])),
        dropout=float(doc.get("dropout", 0.5)),
    )
    _validated(spec)
    if "filters" in doc:
        expect = filter_counts(spec.n, spec.r, spec.k)
        if list(doc["filters"]) != expect:
            raise ValueError(f"descriptor filters {doc['filters']} disagree "
                             f"with derived {expect}")
    if "network" in doc and doc["network"] != network_string(spec):
        raise ValueError(
            "descriptor network string disagrees with its structured fields")
    return spec
