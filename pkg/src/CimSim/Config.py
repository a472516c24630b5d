#        CIM RISC-V Accelerator Simulator
#      Released under the MIT license
#

import copy
import logging
import os
from dataclasses import dataclass, field
from typing import Any

import yaml

from .Memory.Dram import DramTiming


class ConfigError(Exception):
    """
    Exception thrown when a configuration file cannot be read, names an
    unknown key, or sets a value the simulator cannot honour.
    """

    pass


ASSETS_PATH = os.path.join(os.path.dirname(__file__), "Assets")
DEFAULT_CONFIG_PATH = os.path.join(ASSETS_PATH, "default.yaml")

FM_SRAM_BITS = 262144
WEIGHT_SRAM_BITS = 524288

# Free-form sections, not checked against the default tree.
_OPEN_SECTIONS = ("calibration",)


@dataclass(frozen=True)
class LatencyConfig:
    alu: int = 1
    load: int = 1
    store: int = 1
    branch_taken: int = 2
    branch_not_taken: int = 1
    cim: int = 1


@dataclass(frozen=True)
class MemoryConfig:
    imem_words: int = 2097152
    fm_sram_bits: int = FM_SRAM_BITS
    weight_sram_bits: int = WEIGHT_SRAM_BITS

    @property
    def fm_words(self) -> int:
        return self.fm_sram_bits // 32

    @property
    def weight_words(self) -> int:
        return self.weight_sram_bits // 32


@dataclass(frozen=True)
class KwsConfig:
    input_channels: int = 8
    hp_alpha_q15: int = 31785
    bn_scale_q15: tuple[int, ...] = (32767,) * 8
    bn_shift: tuple[int, ...] = (1400, 1000, 600, 200, -200, -600, -1000, -1400)
    quant_threshold: int = 0


@dataclass(frozen=True)
class SimConfig:
    """
    Complete simulator configuration.
    """

    clock_mhz: float = 50
    mode: str = "x"
    max_cycles: int = 500000000
    latency: LatencyConfig = field(default_factory=LatencyConfig)
    memory: MemoryConfig = field(default_factory=MemoryConfig)
    dram: DramTiming = field(default_factory=DramTiming)
    dram_size_words: int = 8388608
    kws: KwsConfig = field(default_factory=KwsConfig)
    calibration: dict = field(default_factory=dict)
    source: str = DEFAULT_CONFIG_PATH

    def with_mode(self, mode: str | None) -> "SimConfig":
        if mode is None:
            return self
        return _replace(self, mode=str(mode).lower())

    def with_dram(self, **timing) -> "SimConfig":
        return _replace(self, dram=DramTiming(**{**self.dram.__dict__, **timing}))

    def with_latency(self, **latency) -> "SimConfig":
        return _replace(self, latency=LatencyConfig(**{**self.latency.__dict__, **latency}))

    def resolve_path(self, path: str) -> str:
        """
        Resolves a path named inside this config, relative to the config file
        first and to the shipped assets second.
        """
        if os.path.isabs(path):
            return path
        local = os.path.join(os.path.dirname(self.source), path)
        return local if os.path.exists(local) else os.path.join(ASSETS_PATH, path)


def _replace(config: SimConfig, **changes) -> SimConfig:
    values = {name: getattr(config, name) for name in config.__dataclass_fields__}
    values.update(changes)
    return SimConfig(**values)


def _read_yaml(path: str) -> dict:
    try:
        with open(path, "r") as f:
            tree = yaml.safe_load(f)
    except OSError as error:
        raise ConfigError("Cannot read config \"{}\".".format(path), error)
    except yaml.YAMLError as error:
        raise ConfigError("Config \"{}\" is not valid YAML.".format(path), error)

    if tree is None:
        return {}
    if not isinstance(tree, dict):
        raise ConfigError("Config \"{}\" must be a key-value tree.".format(path))
    return tree


def _merge(base: dict, overlay: dict, prefix: str = "") -> dict:
    merged = copy.deepcopy(base)
    for key, value in overlay.items():
        dotted = prefix + str(key)
        if key not in base:
            if prefix.split(".")[0] in _OPEN_SECTIONS or key in _OPEN_SECTIONS:
                merged[key] = copy.deepcopy(value)
                continue
            raise ConfigError("Unknown config key \"{}\".".format(dotted))

        if isinstance(base[key], dict):
            if not isinstance(value, dict):
                raise ConfigError("Config key \"{}\" must be a section.".format(dotted))
            merged[key] = _merge(base[key], value, dotted + ".")
        else:
            merged[key] = copy.deepcopy(value)
    return merged


def _build(tree: dict[str, Any], source: str) -> SimConfig:
    try:
        memory = MemoryConfig(**tree["memory"])
        latency = LatencyConfig(**tree["core"]["latency"])
        dram_tree = dict(tree["dram"])
        size_words = dram_tree.pop("size_words")
        dram = DramTiming(**dram_tree)
        kws_tree = dict(tree["kws"])
        kws = KwsConfig(input_channels=kws_tree["input_channels"], hp_alpha_q15=kws_tree["hp_alpha_q15"],
                        bn_scale_q15=tuple(kws_tree["bn_scale_q15"]), bn_shift=tuple(kws_tree["bn_shift"]),
                        quant_threshold=kws_tree["quant_threshold"])
        config = SimConfig(clock_mhz=tree["clock_mhz"], mode=str(tree["macro"]["mode"]).lower(),
                           max_cycles=tree["core"]["max_cycles"], latency=latency, memory=memory, dram=dram,
                           dram_size_words=size_words, kws=kws, calibration=tree.get("calibration", {}) or {},
                           source=source)
    except (KeyError, TypeError) as error:
        raise ConfigError("Config \"{}\" is incomplete or malformed.".format(source), error)

    _validate(config)
    return config


def _validate(config: SimConfig):
    if config.memory.fm_sram_bits != FM_SRAM_BITS or config.memory.weight_sram_bits != WEIGHT_SRAM_BITS:
        raise ConfigError("SRAM sizes are fixed at {}/{} bits and cannot be configured.".format(FM_SRAM_BITS, WEIGHT_SRAM_BITS))
    if config.mode not in ("x", "y"):
        raise ConfigError("macro.mode must be \"x\" or \"y\", not \"{}\".".format(config.mode))
    if config.dram.burst_words < 1 or config.dram.latency_first_word < 0 or config.dram.per_burst_word < 0:
        raise ConfigError("DRAM timing values must be non-negative with burst_words >= 1.")
    if min(config.latency.__dict__.values()) < 1:
        raise ConfigError("Every core latency must be at least one cycle.")
    if config.clock_mhz <= 0:
        raise ConfigError("clock_mhz must be positive.")

    kws = config.kws
    if not 0 < kws.hp_alpha_q15 < 32768:
        raise ConfigError("kws.hp_alpha_q15 must lie strictly between 0 and 1.0 in Q15.")
    if not 1 <= kws.input_channels <= 32:
        raise ConfigError("kws.input_channels must be between 1 and 32.")
    if len(kws.bn_scale_q15) != kws.input_channels or len(kws.bn_shift) != kws.input_channels:
        raise ConfigError("kws.bn_scale_q15 and kws.bn_shift need one entry per input channel.")
    if any(not -32768 <= s <= 32767 for s in kws.bn_scale_q15):
        raise ConfigError("kws.bn_scale_q15 entries must be 16-bit signed Q15 values.")


def load_config(path: str | None = None) -> SimConfig:
    """
    Loads the shipped defaults and merges a user configuration file over
    them.

    :param str path: YAML file to merge over the defaults, None for defaults only.

    :rtype: SimConfig
    :return: Validated configuration.
    """
    tree = _read_yaml(DEFAULT_CONFIG_PATH)
    source = DEFAULT_CONFIG_PATH

    if path:
        tree = _merge(tree, _read_yaml(path))
        source = os.path.abspath(path)
        logging.info("Loaded config %s", path)

    return _build(tree, source)
