#        CIM RISC-V Accelerator Simulator
#      Released under the MIT license
#
#   Optimization ladder: latency of a model as layer fusion, weight fusion
#   and the conv/pool pipeline are switched on one after the other.
#

import logging
from dataclasses import dataclass

from ..Config import ConfigError, SimConfig
from ..Macro.MacroModes import macro_class
from .Estimator import LatencyBreakdown, predict_latency
from .Lowering import lower
from .Model import ModelGraph, load_model
from .Schedule import Phase, Schedule, ScheduleFlags

LADDER = (
    ("baseline", ScheduleFlags()),
    ("layer_fusion", ScheduleFlags(layer_fusion=True)),
    ("weight_fusion", ScheduleFlags(layer_fusion=True, weight_fusion=True)),
    ("pipeline", ScheduleFlags(layer_fusion=True, weight_fusion=True, pipeline=True)),
)


def reduction(before: int, after: int) -> float:
    """
    Percentage latency reduction from `before` to `after` cycles.
    """
    if before <= 0:
        return 0.0
    return 100.0 * (before - after) / before


@dataclass(frozen=True)
class LadderStep:
    name: str
    flags: ScheduleFlags
    latency: LatencyBreakdown
    schedule: Schedule
    reduction: float
    target: float | None = None

    @property
    def total(self) -> int:
        return self.latency.total


@dataclass(frozen=True)
class LadderReport:
    """
    Result of :func:`compare_configs`. `reduction` of a step is measured
    against the step before it; the first step's is always zero.
    """

    model: ModelGraph
    steps: tuple[LadderStep, ...]
    clock_mhz: float
    total_target: float | None = None

    @property
    def total_reduction(self) -> float:
        return reduction(self.steps[0].total, self.steps[-1].total)

    @property
    def peak_tops(self) -> float:
        return macro_class(self.model.mode).peak_tops(self.clock_mhz)

    def is_monotone(self) -> bool:
        totals = [step.total for step in self.steps]
        return all(b <= a for a, b in zip(totals, totals[1:]))

    def as_kv(self) -> dict[str, str]:
        """
        Machine-readable form of the report, as flat `key=value` pairs.
        """
        values = {"model": self.model.name, "mode": self.model.mode.value}
        for step in self.steps:
            prefix = "ladder.{}".format(step.name)
            for phase in Phase:
                values["{}.{}".format(prefix, phase.value)] = str(step.latency[phase])
            values["{}.total".format(prefix)] = str(step.total)
            values["{}.reduction".format(prefix)] = "{:.2f}".format(step.reduction)
            if step.target is not None:
                values["{}.target".format(prefix)] = "{:.2f}".format(step.target)
        values["ladder.total.reduction"] = "{:.2f}".format(self.total_reduction)
        if self.total_target is not None:
            values["ladder.total.target"] = "{:.2f}".format(self.total_target)
        values["ladder.monotone"] = str(self.is_monotone()).lower()
        values["peak.tops"] = "{:.2f}".format(self.peak_tops)
        return values

    def format_kv(self) -> str:
        return "".join("{}={}\n".format(key, value) for key, value in self.as_kv().items())

    def format_text(self) -> str:
        phases = [phase.value for phase in Phase]
        header = "{:<14}".format("step") + "".join("{:>16}".format(p) for p in phases)
        header += "{:>14}{:>10}{:>10}".format("total", "reduce%", "target%")

        lines = ["Latency ladder for {} ({}-mode)".format(self.model.name, self.model.mode.value), header]
        for step in self.steps:
            target = "{:.2f}".format(step.target) if step.target is not None else "-"
            row = "{:<14}".format(step.name) + "".join("{:>16}".format(step.latency[p]) for p in Phase)
            row += "{:>14}{:>10.2f}{:>10}".format(step.total, step.reduction, target)
            lines.append(row)

        target = "{:.2f}".format(self.total_target) if self.total_target is not None else "-"
        lines.append("{:<14}{:>{width}.2f}{:>10}".format("total", self.total_reduction, target,
                                                        width=16 * len(phases) + 24))
        lines.append("peak throughput: {:.2f} TOPS at {} MHz".format(self.peak_tops, self.clock_mhz))
        return "\n".join(lines) + "\n"


def compare_configs(model: ModelGraph, config: SimConfig, targets: dict | None = None) -> LadderReport:
    """
    Lowers and estimates a model at every step of the optimization ladder.

    :param ModelGraph model: Model to evaluate.
    :param SimConfig config: Supplies DRAM timing, core latencies and clock.
    :param dict targets: Optional reference reductions keyed by step name and `total`.

    :rtype: LadderReport
    :return: One step per ladder rung, latencies non-increasing.
    """
    targets = targets or {}
    steps = []
    previous = None

    for name, flags in LADDER:
        schedule = lower(model, flags, config.dram, config.latency)
        latency = predict_latency(schedule, config.dram, config.latency)
        step_reduction = reduction(previous, latency.total) if previous is not None else 0.0
        steps.append(LadderStep(name, flags, latency, schedule, step_reduction, targets.get(name)))
        previous = latency.total
        logging.info("Ladder %s: %s cycles (%.2f%%)", name, latency.total, step_reduction)

    return LadderReport(model, tuple(steps), config.clock_mhz, targets.get("total"))


def calibration_report(config: SimConfig) -> LadderReport:
    """
    Runs the ladder on the model named in the config's `calibration`
    section, with its reference targets alongside.
    """
    section = config.calibration or {}
    if "model" not in section:
        raise ConfigError("Config \"{}\" has no calibration model.".format(config.source))

    model = load_model(config.resolve_path(section["model"])).with_mode(config.mode)
    targets = {str(k): float(v) for k, v in (section.get("targets") or {}).items()}
    return compare_configs(model, config, targets)
