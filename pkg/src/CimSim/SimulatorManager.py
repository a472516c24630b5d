#        CIM RISC-V Accelerator Simulator
#      Released under the MIT license
#

import logging
from dataclasses import dataclass, field

import numpy as np

from .Compiler.Estimator import LatencyBreakdown
from .Compiler.Schedule import Schedule
from .Compiler.Weights import LayerWeights, pack_dram_images
from .Config import SimConfig, load_config
from .Core.Core import Core, ExecResult, MachineState
from .Core.Trace import TraceEntry
from .Macro.CimMacro import CimMacro, MacroMode
from .Macro.MacroModes import MACRO_CLASSES
from .Memory.Dma import DmaEngine
from .Memory.Dram import Dram
from .Memory.Sram import SramBank


class SimulationError(Exception):
    """
    Exception thrown when a simulation unit cannot be built for a request,
    or a schedule does not fit the unit it is asked to run on.
    """

    pass


@dataclass
class SimulationUnit:
    """
    One core with its memories, uDMA engine and CIM macro, wired together.
    """

    config: SimConfig
    macro: CimMacro
    imem: SramBank
    fm_sram: SramBank
    weight_sram: SramBank
    dram: Dram
    dma: DmaEngine
    core: Core

    def run(self, trace: bool = False, on_retire=None) -> tuple[MachineState, list[TraceEntry]]:
        return self.core.run(self.config.max_cycles, trace=trace, on_retire=on_retire)


@dataclass
class ScheduleRun:
    """
    Outcome of executing a lowered schedule on a simulation unit.
    """

    output_bits: np.ndarray
    latency: LatencyBreakdown
    state: MachineState
    unit: SimulationUnit
    trace: list[TraceEntry] = field(default_factory=list)

    @property
    def cycles(self) -> int:
        return self.state.cycle


class SimulatorManager:
    """
    Central simulator manager, building simulation units from a configuration.
    An instance of this class must be created to run programs or lowered
    schedules.
    """

    @staticmethod
    def _get_macro(mode: str | MacroMode | None, default: str) -> CimMacro:
        """
        Creates a new CIM macro instance for the given mode name.

        :param str mode: Name of a macro mode ("x" or "y"), None for the configured default.

        :rtype: CimMacro.* instance
        :return: Instance of a macro geometry class
        """
        name = mode.value if isinstance(mode, MacroMode) else str(mode or default).lower()

        macros = {m.value: cls for m, cls in MACRO_CLASSES.items()}
        macro_class = macros.get(name)
        if macro_class is None:
            raise SimulationError("Unknown CIM macro mode \"{}\".".format(name))

        return macro_class()

    def __init__(self, config: SimConfig | None = None):
        """
        Creates a new SimulatorManager.

        :param SimConfig config: Simulator configuration, None for the shipped defaults.
        """
        self.config: SimConfig = config or load_config()

    def build(self, mode: str | MacroMode | None = None) -> SimulationUnit:
        """
        Builds a fresh simulation unit with zeroed memories.

        :param str mode: Macro mode, None for the configured one.

        :rtype: SimulationUnit
        :return: Ready-to-run unit.
        """
        config = self.config
        macro = self._get_macro(mode, config.mode)

        imem = SramBank("imem", config.memory.imem_words * 32)
        fm_sram = SramBank("fm_sram", config.memory.fm_sram_bits, wide_port_bits=256)
        weight_sram = SramBank("weight_sram", config.memory.weight_sram_bits)
        dram = Dram(config.dram, config.dram_size_words)
        dma = DmaEngine(dram, fm_sram, weight_sram)
        core = Core(imem, fm_sram, weight_sram, macro, dma, config.latency)

        logging.debug("Built %s-mode simulation unit", macro.MODE.value)
        return SimulationUnit(config, macro, imem, fm_sram, weight_sram, dram, dma, core)

    def run_program(self, words, mode: str | MacroMode | None = None,
                    trace: bool = False) -> tuple[SimulationUnit, MachineState, list[TraceEntry]]:
        """
        Loads a program image at address 0 and runs it until it halts.

        :rtype: (SimulationUnit, MachineState, list(TraceEntry))
        :return: The unit after the run, its final state and the trace.
        """
        unit = self.build(mode)
        unit.core.load_program(words)
        state, entries = unit.run(trace=trace)
        return unit, state, entries

    def load_schedule_data(self, unit: SimulationUnit, schedule: Schedule, weights: LayerWeights) -> None:
        """
        Places a schedule's packed weight images in the unit's DRAM.

        :param SimulationUnit unit: Unit the schedule will run on.
        :param Schedule schedule: Lowered schedule.
        :param dict weights: Ternary weights per conv layer index.
        """
        if schedule.dram_words > len(unit.dram):
            raise SimulationError("Schedule needs {} DRAM words, config provides {}.".format(
                schedule.dram_words, len(unit.dram)))

        for dram_base, words in pack_dram_images(schedule.model, schedule.images, weights):
            unit.dram.write_words(dram_base, words)

    @staticmethod
    def execute(unit: SimulationUnit, words, phases: dict, trace: bool = False):
        """
        Runs a program, charging every retired instruction's cycles to the
        phase of its address.

        :param dict phases: Phase of every instruction address.

        :rtype: (LatencyBreakdown, MachineState, list(TraceEntry))
        :return: Measured breakdown, final state and the trace.
        """
        latency = LatencyBreakdown()

        def charge(pc: int, result: ExecResult):
            latency.add(phases[pc], result.cycles_consumed)

        unit.core.load_program(words)
        state, entries = unit.run(trace=trace, on_retire=charge)
        return latency, state, entries

    def execute_schedule(self, schedule: Schedule, weights: LayerWeights, input_bits,
                         trace: bool = False) -> ScheduleRun:
        """
        Executes a lowered schedule: places the packed weight images in DRAM
        and the input feature map in FM SRAM, runs the program, then reads the
        output feature map back.

        :param Schedule schedule: Lowered schedule.
        :param dict weights: Ternary weights per conv layer index.
        :param numpy.ndarray input_bits: `[input_length x input_channels]` input activation bits.
        :param bool trace: Record a per-instruction trace.

        :rtype: ScheduleRun
        :return: Output bits, measured latency breakdown and final state.
        """
        unit = self.build(schedule.model.mode)
        self.load_schedule_data(unit, schedule, weights)
        schedule.input_buffer.write_bits(unit.fm_sram.words, input_bits)

        latency, state, entries = self.execute(unit, schedule.program(), schedule.phase_map(), trace)

        output_bits = schedule.output_buffer.read_bits(unit.fm_sram.words)
        logging.info("Executed %s (%s): %s cycles", schedule.model.name, schedule.flags.name, state.cycle)
        return ScheduleRun(output_bits, latency, state, unit, entries)
