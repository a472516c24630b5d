#        CIM RISC-V Accelerator Simulator
#      Released under the MIT license
#

import logging
from dataclasses import dataclass, replace
from enum import Enum

import numpy as np
import yaml

from ..Macro.CimMacro import MacroMode
from ..Macro.MacroModes import parse_mode


class ModelError(Exception):
    """
    Exception thrown when a model description is malformed or its layer
    shapes do not chain.
    """

    pass


class LayerKind(Enum):
    CONV1D = "conv1d"
    MAXPOOL = "maxpool"
    WEIGHT_UPDATE = "weight_update"
    GAP = "gap"


def words_per_row(channels: int) -> int:
    """
    Number of 32-bit words holding one row of a packed 1-bit feature map.
    """
    return -(-channels // 32)


@dataclass(frozen=True)
class LayerSpec:
    """
    One layer of a model. `in_channels` and `input_length` are derived when
    the model is built; conv layers have no padding and pools are
    non-overlapping with stride equal to their width.
    """

    kind: LayerKind
    out_channels: int = 0
    kernel: int = 3
    stride: int = 1
    pool_width: int = 2
    in_channels: int = 0
    input_length: int = 0
    name: str = ""

    @property
    def is_compute(self) -> bool:
        return self.kind in (LayerKind.CONV1D, LayerKind.MAXPOOL)

    @property
    def output_length(self) -> int:
        if self.kind == LayerKind.CONV1D:
            return (self.input_length - self.kernel) // self.stride + 1
        if self.kind == LayerKind.MAXPOOL:
            return self.input_length // self.pool_width
        if self.kind == LayerKind.GAP:
            return 1
        return self.input_length

    @property
    def output_channels(self) -> int:
        return self.out_channels if self.kind == LayerKind.CONV1D else self.in_channels

    def input_rows(self, first: int, last: int) -> tuple[int, int]:
        """
        Input rows needed to produce output rows `[first, last)` of this
        layer, as a half-open range.
        """
        if self.kind == LayerKind.CONV1D:
            return first * self.stride, (last - 1) * self.stride + self.kernel
        if self.kind == LayerKind.MAXPOOL:
            return first * self.pool_width, last * self.pool_width
        return first, last

    def describe(self) -> str:
        if self.kind == LayerKind.CONV1D:
            return "{} conv1d {}->{} k={} s={} L={}->{}".format(self.name, self.in_channels, self.out_channels,
                                                                 self.kernel, self.stride, self.input_length,
                                                                 self.output_length)
        if self.kind == LayerKind.MAXPOOL:
            return "{} maxpool w={} C={} L={}->{}".format(self.name, self.pool_width, self.in_channels,
                                                           self.input_length, self.output_length)
        return "{} {}".format(self.name, self.kind.value)


@dataclass(frozen=True)
class ModelGraph:
    """
    Ordered layer list with its input shape and macro mode. Build instances
    with :func:`build_model`, which derives and checks every layer shape.
    """

    name: str
    mode: MacroMode
    input_length: int
    input_channels: int
    n_classes: int
    layers: tuple[LayerSpec, ...]

    def compute_layers(self) -> list[tuple[int, LayerSpec]]:
        """
        Conv and max-pool layers with their index in :attr:`layers`.
        """
        return [(i, layer) for i, layer in enumerate(self.layers) if layer.is_compute]

    def conv_layers(self) -> list[tuple[int, LayerSpec]]:
        return [(i, layer) for i, layer in enumerate(self.layers) if layer.kind == LayerKind.CONV1D]

    def final_layer(self) -> LayerSpec:
        return self.compute_layers()[-1][1]

    @property
    def output_length(self) -> int:
        return self.final_layer().output_length

    @property
    def output_channels(self) -> int:
        return self.final_layer().output_channels

    @property
    def has_gap(self) -> bool:
        return self.layers[-1].kind == LayerKind.GAP

    def with_mode(self, mode: str | MacroMode) -> "ModelGraph":
        return replace(self, mode=parse_mode(mode))

    def describe(self) -> str:
        lines = ["model {} ({}-mode, input {}x{})".format(self.name, self.mode.value, self.input_length,
                                                         self.input_channels)]
        lines.extend("  " + layer.describe() for layer in self.layers)
        return "\n".join(lines)


def _chain(layers: list[LayerSpec], input_length: int, input_channels: int) -> tuple[LayerSpec, ...]:
    chained = []
    length, channels = input_length, input_channels

    for index, layer in enumerate(layers):
        name = layer.name or "layer{}".format(index)
        if layer.in_channels and layer.in_channels != channels:
            raise ModelError("{} declares {} input channels but receives {}.".format(name, layer.in_channels,
                                                                                     channels))
        layer = replace(layer, in_channels=channels, input_length=length, name=name)

        if layer.kind == LayerKind.CONV1D:
            if layer.out_channels < 1 or layer.kernel < 1 or layer.stride < 1:
                raise ModelError("{} needs positive out_channels, kernel and stride.".format(name))
            if length < layer.kernel:
                raise ModelError("{} input length {} is shorter than its kernel {}.".format(name, length,
                                                                                            layer.kernel))
        elif layer.kind == LayerKind.MAXPOOL:
            if layer.pool_width < 1:
                raise ModelError("{} needs a positive pool_width.".format(name))
            if length < layer.pool_width:
                raise ModelError("{} input length {} is shorter than its pool width.".format(name, length))

        chained.append(layer)
        length, channels = layer.output_length, layer.output_channels

    return tuple(chained)


def validate(model: ModelGraph) -> None:
    """
    Checks the structural rules of a model: at least one compute layer,
    weight updates only between compute layers, GAP only at the end.

    :param ModelGraph model: Model to check.
    """
    layers = model.layers
    if not any(layer.is_compute for layer in layers):
        raise ModelError("Model \"{}\" has no conv or max-pool layer.".format(model.name))
    if model.input_length < 1 or model.input_channels < 1:
        raise ModelError("Model \"{}\" needs a positive input shape.".format(model.name))

    compute_seen = False
    for index, layer in enumerate(layers):
        if layer.kind == LayerKind.GAP and index != len(layers) - 1:
            raise ModelError("{}: global average pooling must be the last layer.".format(layer.name))
        if layer.kind == LayerKind.WEIGHT_UPDATE:
            following = [l for l in layers[index + 1:] if l.kind != LayerKind.GAP]
            if not compute_seen or not following or not following[0].is_compute:
                raise ModelError("{}: a weight update must sit between two compute layers.".format(layer.name))
        compute_seen = compute_seen or layer.is_compute

    if model.has_gap and not 1 <= model.n_classes <= model.output_channels:
        raise ModelError("Model \"{}\" maps {} classes onto {} output channels.".format(
            model.name, model.n_classes, model.output_channels))


def build_model(name: str, mode: str | MacroMode, input_length: int, input_channels: int,
                layers: list[LayerSpec], n_classes: int = 0) -> ModelGraph:
    """
    Builds a model, deriving every layer's input shape from its predecessor.

    :rtype: ModelGraph
    :return: Validated model.
    """
    model = ModelGraph(name=name, mode=parse_mode(mode), input_length=input_length, input_channels=input_channels,
                       n_classes=n_classes, layers=_chain(list(layers), input_length, input_channels))
    validate(model)
    return model


_LAYER_KEYS = ("kind", "out_channels", "kernel", "stride", "pool_width", "in_channels", "name")


def _layer_from_tree(index: int, tree: dict) -> LayerSpec:
    if not isinstance(tree, dict) or "kind" not in tree:
        raise ModelError("Layer {} must be a mapping with a \"kind\" key.".format(index))
    unknown = set(tree) - set(_LAYER_KEYS)
    if unknown:
        raise ModelError("Layer {} has unknown keys: {}.".format(index, ", ".join(sorted(unknown))))
    try:
        kind = LayerKind(str(tree["kind"]).lower())
    except ValueError:
        raise ModelError("Layer {} has unknown kind \"{}\".".format(index, tree["kind"]))

    values = {key: tree[key] for key in _LAYER_KEYS[1:] if key in tree}
    return LayerSpec(kind=kind, **values)


def model_from_tree(tree: dict, name: str = "model") -> ModelGraph:
    """
    Builds a model from a parsed model description tree.
    """
    try:
        layers = [_layer_from_tree(i, layer) for i, layer in enumerate(tree["layers"])]
        return build_model(name=tree.get("name", name), mode=tree.get("mode", "x"),
                           input_length=int(tree["input_length"]), input_channels=int(tree["input_channels"]),
                           layers=layers, n_classes=int(tree.get("n_classes", 0)))
    except (KeyError, TypeError) as error:
        raise ModelError("Model description \"{}\" is incomplete or malformed.".format(name), error)


def load_model(path: str) -> ModelGraph:
    """
    Loads a YAML model description file.

    :param str path: Model file path.

    :rtype: ModelGraph
    :return: Validated model.
    """
    try:
        with open(path, "r") as f:
            tree = yaml.safe_load(f)
    except (OSError, yaml.YAMLError) as error:
        raise ModelError("Cannot read model \"{}\".".format(path), error)

    if not isinstance(tree, dict):
        raise ModelError("Model \"{}\" must be a key-value tree.".format(path))

    model = model_from_tree(tree, name=path)
    logging.info("Loaded model %s with %s layers", model.name, len(model.layers))
    return model


def kws_model(channels: int = 256, input_length: int = 4000, input_channels: int = 8, n_classes: int = 12,
              mode: str | MacroMode = "x", kernel: int = 3) -> ModelGraph:
    """
    The keyword spotting network: five (conv, max-pool) pairs, a weight
    update, then conv, max-pool, conv and global average pooling.
    """
    layers = []
    for _ in range(5):
        layers.append(LayerSpec(LayerKind.CONV1D, out_channels=channels, kernel=kernel))
        layers.append(LayerSpec(LayerKind.MAXPOOL, pool_width=2))
    layers.append(LayerSpec(LayerKind.WEIGHT_UPDATE))
    layers.append(LayerSpec(LayerKind.CONV1D, out_channels=channels, kernel=kernel))
    layers.append(LayerSpec(LayerKind.MAXPOOL, pool_width=2))
    layers.append(LayerSpec(LayerKind.CONV1D, out_channels=channels, kernel=kernel))
    layers.append(LayerSpec(LayerKind.GAP))

    return build_model("kws-cnn", mode, input_length, input_channels, layers, n_classes)


def random_model(rng: np.random.Generator, mode: str | MacroMode = "x", max_length: int = 96) -> ModelGraph:
    """
    Draws a small random model that fits the macro, for equivalence and
    monotonicity checks.
    """
    channels = int(rng.integers(1, 65))
    input_length = int(rng.integers(24, max_length + 1))
    length = input_length
    layers = []

    for block in range(int(rng.integers(1, 4))):
        kernel = int(rng.integers(1, 4))
        stride = int(rng.integers(1, 3))
        if length < kernel + 2:
            break
        if layers and rng.random() < 0.3:
            layers.append(LayerSpec(LayerKind.WEIGHT_UPDATE))
        layers.append(LayerSpec(LayerKind.CONV1D, out_channels=int(rng.integers(1, 97)), kernel=kernel,
                                stride=stride))
        length = (length - kernel) // stride + 1
        if length >= 4 and rng.random() < 0.7:
            width = int(rng.integers(2, 4))
            layers.append(LayerSpec(LayerKind.MAXPOOL, pool_width=width))
            length //= width

    return build_model("random", mode, input_length, channels, layers)
