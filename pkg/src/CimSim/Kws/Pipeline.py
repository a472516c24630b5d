#        CIM RISC-V Accelerator Simulator
#      Released under the MIT license
#

import logging
from dataclasses import dataclass

import numpy as np

from ..Compiler.Estimator import LatencyBreakdown
from ..Compiler.Lowering import lower
from ..Compiler.Model import ModelError, ModelGraph
from ..Compiler.Schedule import Phase, Schedule, ScheduleFlags
from ..Compiler.Weights import LayerWeights
from ..Isa.Instruction import HALT, encode
from ..SimulatorManager import SimulatorManager
from .Postprocess import gap_program, read_scores
from .Preprocess import place_audio, preprocess_program


@dataclass
class KwsResult:
    scores: np.ndarray
    predicted: int
    latency: LatencyBreakdown
    cycles: int
    schedule: Schedule
    trace: list

    def as_kv(self) -> dict[str, str]:
        values = {"kws.predicted": str(self.predicted), "kws.cycles": str(self.cycles)}
        values.update(("kws.score.{}".format(i), str(int(s))) for i, s in enumerate(self.scores))
        values.update(("kws.latency.{}".format(k), str(v)) for k, v in self.latency.as_dict().items())
        return values


def load_pcm(path: str, length: int) -> np.ndarray:
    """
    Reads a raw little-endian signed 16-bit PCM file. Shorter files are
    zero-padded and longer ones truncated to `length` samples.
    """
    samples = np.fromfile(path, dtype="<i2")
    if len(samples) != length:
        logging.info("Fitting %s samples from %s to a %s sample frame", len(samples), path, length)
    frame = np.zeros(length, dtype=np.int16)
    frame[:min(length, len(samples))] = samples[:length]
    return frame


def save_pcm(path: str, samples) -> None:
    np.asarray(samples, dtype="<i2").tofile(path)


def random_frame(rng: np.random.Generator, length: int) -> np.ndarray:
    return rng.integers(-32768, 32768, size=length, dtype=np.int64).astype(np.int16)


def kws_program(schedule: Schedule, params) -> tuple[list[int], dict[int, Phase]]:
    """
    Chains the front end, the lowered network and the GAP stage into one
    program. The lowered network has no PC-relative control flow, so it can
    sit at any address.

    :rtype: (list(int), dict)
    :return: Encoded program with its halt, and the phase of every instruction address.
    """
    model = schedule.model
    front = preprocess_program(model.input_length, params)
    network = schedule.instructions()
    back = gap_program(schedule.output_buffer, model.n_classes)

    phases = {}
    for index in range(len(front)):
        phases[4 * index] = Phase.PRE_POST
    for address, phase in schedule.phase_map().items():
        phases[4 * len(front) + address] = phase
    base = 4 * (len(front) + len(network))
    for index in range(len(back)):
        phases[base + 4 * index] = Phase.PRE_POST

    words = [encode(inst) for inst in front + network + back] + [encode(HALT)]
    return words, phases


def run_end_to_end(manager: SimulatorManager, model: ModelGraph, weights: LayerWeights, samples,
                   flags: ScheduleFlags, trace: bool = False) -> KwsResult:
    """
    Runs keyword spotting entirely on the simulator: the RV32I front end,
    the lowered binary network on the CIM path, then global average pooling
    and argmax on the core.

    :param SimulatorManager manager: Supplies the configuration and simulation unit.
    :param ModelGraph model: Network ending in global average pooling.
    :param dict weights: Ternary weights per conv layer index.
    :param samples: Signed 16-bit PCM frame of `model.input_length` samples.
    :param ScheduleFlags flags: Enabled optimizations.

    :rtype: KwsResult
    :return: Scores, predicted class and the measured latency breakdown.
    """
    config = manager.config
    samples = np.asarray(samples)
    if not model.has_gap:
        raise ModelError("Model \"{}\" does not end in global average pooling.".format(model.name))
    if model.input_channels != config.kws.input_channels:
        raise ModelError("Model \"{}\" takes {} input channels, the front end produces {}.".format(
            model.name, model.input_channels, config.kws.input_channels))
    if samples.shape != (model.input_length,):
        raise ModelError("Audio frame has {} samples, model \"{}\" takes {}.".format(
            samples.size, model.name, model.input_length))

    schedule = lower(model, flags, config.dram, config.latency)
    words, phases = kws_program(schedule, config.kws)

    unit = manager.build(model.mode)
    manager.load_schedule_data(unit, schedule, weights)
    place_audio(unit.fm_sram, samples)

    latency, state, entries = manager.execute(unit, words, phases, trace)
    scores, predicted = read_scores(unit.weight_sram, model.n_classes)

    logging.info("KWS %s (%s): class %s in %s cycles", model.name, flags.name, predicted, state.cycle)
    return KwsResult(scores, predicted, latency, state.cycle, schedule, entries)
