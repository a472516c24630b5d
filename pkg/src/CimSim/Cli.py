#        CIM RISC-V Accelerator Simulator
#      Released under the MIT license
#
#   Command-line driver: `cimsim asm|run|lower|report|kws`.
#

import argparse
import logging
import sys
from dataclasses import replace

import numpy as np

from .Compiler.Estimator import predict_latency
from .Compiler.Ladder import calibration_report, compare_configs
from .Compiler.Lowering import LoweringError, lower
from .Compiler.Model import ModelError, kws_model, load_model
from .Compiler.Schedule import ScheduleFlags
from .Compiler.Weights import load_weight_images, random_weights, save_weight_images
from .Config import ConfigError, load_config
from .Core.Core import CoreTrap, SimulationTimeout
from .Core.Trace import write_trace
from .ImageHelpers import PILHelper
from .Isa.Assembler import AssemblerError, assemble, disassemble_program, from_image, to_image
from .Isa.Instruction import IsaError
from .Kws.Golden import golden_kws, golden_network
from .Kws.Pipeline import load_pcm, random_frame, run_end_to_end
from .Kws.Preprocess import preprocess_golden
from .Macro.CimMacro import MacroError, MacroMode
from .Macro.MacroModes import macro_class
from .Memory.Dma import DmaBusyError
from .Memory.Sram import MemoryAccessError
from .SimulatorManager import SimulationError, SimulatorManager

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_USAGE = 2
EXIT_TIMEOUT = 3

_ERRORS = (AssemblerError, IsaError, ConfigError, ModelError, LoweringError, MacroError, MemoryAccessError,
           DmaBusyError, CoreTrap, SimulationError, OSError, ValueError)


def _flags(args) -> ScheduleFlags:
    return ScheduleFlags(layer_fusion=args.enable_layer_fusion, weight_fusion=args.enable_weight_fusion,
                         pipeline=args.enable_pipeline)


def _model(args, config):
    if args.model in (None, "kws-cnn"):
        return kws_model(mode=config.mode, input_channels=config.kws.input_channels)
    model = load_model(config.resolve_path(args.model))
    return model.with_mode(args.mode) if args.mode else model


def _weights(args, model):
    if getattr(args, "weights", None):
        return load_weight_images(args.weights, model)
    return random_weights(model, np.random.default_rng(args.seed))


def _print_kv(values: dict) -> None:
    for key, value in values.items():
        print("{}={}".format(key, value))


def cmd_asm(args, config) -> int:
    with open(args.input, "rb" if args.disassemble else "r") as f:
        source = f.read()

    if args.disassemble:
        text = disassemble_program(from_image(source))
        if args.output:
            with open(args.output, "w") as f:
                f.write(text)
        else:
            sys.stdout.write(text)
        return EXIT_OK

    words = assemble(source)
    output = args.output or args.input.rsplit(".", 1)[0] + ".bin"
    with open(output, "wb") as f:
        f.write(to_image(words))
    print("{}: {} instructions".format(output, len(words)))
    return EXIT_OK


def cmd_run(args, config) -> int:
    if args.max_cycles is not None:
        config = replace(config, max_cycles=args.max_cycles)

    if args.image.endswith((".s", ".asm")):
        with open(args.image, "r") as f:
            words = assemble(f.read())
    else:
        with open(args.image, "rb") as f:
            words = from_image(f.read())

    _, state, entries = SimulatorManager(config).run_program(words, trace=bool(args.trace))
    if args.trace:
        write_trace(args.trace, entries)

    _print_kv({"pc": "0x{:08x}".format(state.pc), "cycles": state.cycle, "retired": state.retired})
    for index, value in enumerate(state.regs):
        if value:
            print("x{}=0x{:08x}".format(index, value))
    return EXIT_OK


def cmd_lower(args, config) -> int:
    model = _model(args, config)
    schedule = lower(model, _flags(args), config.dram, config.latency)
    latency = predict_latency(schedule, config.dram, config.latency)

    if args.output:
        with open(args.output, "w") as f:
            f.write(schedule.dump())
    else:
        sys.stdout.write(schedule.dump())

    if args.program:
        with open(args.program, "wb") as f:
            f.write(to_image(schedule.program()))
    if args.save_weights:
        save_weight_images(args.save_weights, model, _weights(args, model))

    print("# flags: {}, blocks: {}, predicted: {}".format(schedule.flags.name, list(schedule.block_sizes), latency))
    return EXIT_OK


def cmd_report(args, config) -> int:
    if not args.ladder:
        values = {"peak.tops": "{:.2f}".format(_peak_tops(config))}
        if args.kv:
            _print_kv(values)
        else:
            print("peak throughput: {} TOPS at {} MHz".format(values["peak.tops"], config.clock_mhz))
        return EXIT_OK

    if args.model is None and config.calibration.get("model"):
        report = calibration_report(config)
    else:
        report = compare_configs(_model(args, config), config)

    sys.stdout.write(report.format_kv() if args.kv else report.format_text())
    return EXIT_OK


def _peak_tops(config) -> float:
    return macro_class(config.mode).peak_tops(config.clock_mhz)


def cmd_kws(args, config) -> int:
    model = _model(args, config)
    weights = _weights(args, model)
    rng = np.random.default_rng(args.seed + 1)
    samples = load_pcm(args.audio, model.input_length) if args.audio else random_frame(rng, model.input_length)

    result = run_end_to_end(SimulatorManager(config), model, weights, samples, _flags(args), trace=bool(args.trace))
    if args.trace:
        write_trace(args.trace, result.trace)

    if args.kv:
        _print_kv(result.as_kv())
    else:
        print("predicted class {} in {} cycles".format(result.predicted, result.cycles))
        print("scores: {}".format(" ".join(str(int(s)) for s in result.scores)))
        print("latency: {}".format(result.latency))

    if args.check:
        scores, predicted = golden_kws(model, weights, samples, config.kws)
        if predicted != result.predicted or not np.array_equal(scores, result.scores):
            print("error: simulated scores differ from the software reference", file=sys.stderr)
            return EXIT_ERROR
        print("software reference agrees")

    if args.render:
        bits = golden_network(model, weights, preprocess_golden(samples, config.kws))
        PILHelper.feature_map_image(bits, scale=4).save(args.render)
    return EXIT_OK


def _parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="YAML file merged over the shipped defaults")
    common.add_argument("--mode", choices=[m.value for m in MacroMode], help="CIM macro mode")
    common.add_argument("--enable-layer-fusion", action="store_true")
    common.add_argument("--enable-weight-fusion", action="store_true")
    common.add_argument("--enable-pipeline", action="store_true")
    common.add_argument("--trace", metavar="PATH", help="write a per-instruction trace")
    common.add_argument("--seed", type=int, default=0, help="seed for generated weights and audio")
    common.add_argument("--verbose", "-v", action="store_true")

    parser = argparse.ArgumentParser(prog="cimsim", description="CIM RISC-V accelerator simulator")
    commands = parser.add_subparsers(dest="command", required=True)

    asm = commands.add_parser("asm", parents=[common], help="assemble or disassemble a program")
    asm.add_argument("input")
    asm.add_argument("-o", "--output")
    asm.add_argument("-d", "--disassemble", action="store_true", help="disassemble a binary image")
    asm.set_defaults(handler=cmd_asm)

    run = commands.add_parser("run", parents=[common], help="run a program image until it halts")
    run.add_argument("image")
    run.add_argument("--max-cycles", type=int)
    run.set_defaults(handler=cmd_run)

    for name, handler, text in (("lower", cmd_lower, "lower a model to a CIM schedule"),
                                ("report", cmd_report, "peak throughput and the optimization ladder"),
                                ("kws", cmd_kws, "run keyword spotting end to end")):
        sub = commands.add_parser(name, parents=[common], help=text)
        sub.add_argument("--model", help="model YAML file, or \"kws-cnn\"")
        sub.add_argument("--kv", action="store_true", help="machine-readable key=value output")
        sub.set_defaults(handler=handler)
        if name == "lower":
            sub.add_argument("-o", "--output", help="write the schedule listing here")
            sub.add_argument("--program", help="write the program image here")
            sub.add_argument("--save-weights", metavar="DIR", help="write generated weight images here")
        elif name == "report":
            sub.add_argument("--ladder", action="store_true")
        else:
            sub.add_argument("--weights", metavar="DIR", help="directory of weight images")
            sub.add_argument("--audio", help="raw little-endian 16-bit PCM file")
            sub.add_argument("--check", action="store_true", help="compare against the software reference")
            sub.add_argument("--render", metavar="PNG", help="render the final feature map")

    return parser


def main(argv: list[str] | None = None) -> int:
    try:
        args = _parser().parse_args(argv)
    except SystemExit as exit:
        return EXIT_OK if exit.code == 0 else EXIT_USAGE

    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")

    try:
        config = load_config(args.config).with_mode(args.mode)
        return args.handler(args, config)
    except SimulationTimeout as error:
        print("timeout: {}".format(error), file=sys.stderr)
        return EXIT_TIMEOUT
    except _ERRORS as error:
        print("error: {}".format(error), file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
