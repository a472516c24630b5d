#!/usr/bin/env python3

#        CIM RISC-V Accelerator Simulator
#      Released under the MIT license
#

import os
import sys

import numpy as np
import pytest

sys.path.insert(0, os.path.join(os.path.dirname(__file__), '../src'))

from CimSim.Compiler.Estimator import predict_latency
from CimSim.Compiler.Ladder import LADDER, calibration_report, compare_configs, reduction
from CimSim.Compiler.Lowering import REG_DMA_BASE, LoweringError, check_geometry, lower
from CimSim.Compiler.Model import (LayerKind, LayerSpec, ModelError, build_model, kws_model, load_model,
                                   model_from_tree, random_model)
from CimSim.Compiler.Schedule import DmaStartItem, Phase, Schedule, ScheduleFlags
from CimSim.Compiler.Weights import load_weight_images, random_weights, save_weight_images, zero_weights
from CimSim.Config import ASSETS_PATH, ConfigError, FM_SRAM_BITS, load_config
from CimSim.Isa.Instruction import BaseOp
from CimSim.Kws.Golden import golden_network
from CimSim.Macro.CimMacro import MacroError
from CimSim.Memory.Dma import DmaDirection
from CimSim.SimulatorManager import SimulatorManager

LOWERED_REGISTERS = {0, 1, 2, 3, 4, 5, 6, 7, 8, 28, 29}


@pytest.fixture(scope="module")
def config():
    return load_config()


@pytest.fixture(scope="module")
def manager(config):
    return SimulatorManager(config)


def _small_model(mode="x", length=40):
    layers = [
        LayerSpec(LayerKind.CONV1D, out_channels=24, kernel=3),
        LayerSpec(LayerKind.MAXPOOL, pool_width=2),
        LayerSpec(LayerKind.CONV1D, out_channels=40, kernel=2),
        LayerSpec(LayerKind.WEIGHT_UPDATE),
        LayerSpec(LayerKind.CONV1D, out_channels=16, kernel=3, stride=2),
        LayerSpec(LayerKind.MAXPOOL, pool_width=2),
    ]
    return build_model("small", mode, length, 8, layers)


def _random_input(rng, model):
    return rng.integers(0, 2, size=(model.input_length, model.input_channels)).astype(np.uint8)


def test_kws_model_shape():
    model = kws_model()
    assert [layer.kind for layer in model.layers].count(LayerKind.CONV1D) == 7
    assert model.has_gap
    assert model.output_channels == 256

    shipped = load_model(os.path.join(ASSETS_PATH, "models", "kws_cnn.yaml"))
    assert shipped.layers == model.layers


def test_model_validation():
    with pytest.raises(ModelError):
        build_model("gap-first", "x", 16, 8, [LayerSpec(LayerKind.GAP), LayerSpec(LayerKind.CONV1D, out_channels=4)])
    with pytest.raises(ModelError):
        build_model("update-first", "x", 16, 8, [LayerSpec(LayerKind.WEIGHT_UPDATE),
                                                  LayerSpec(LayerKind.CONV1D, out_channels=4)])
    with pytest.raises(ModelError):
        build_model("too-short", "x", 2, 8, [LayerSpec(LayerKind.CONV1D, out_channels=4, kernel=3)])
    with pytest.raises(ModelError):
        kws_model(channels=8, n_classes=12)
    with pytest.raises(ModelError):
        model_from_tree({"input_length": 16, "input_channels": 8, "layers": [{"kind": "conv1d", "colour": 1}]})


def test_kws_cnn_lowers_with_fusion_inside_fm_sram(config):
    schedule = lower(kws_model(), ScheduleFlags(layer_fusion=True), config.dram, config.latency)
    assert schedule.fm_high_water <= FM_SRAM_BITS
    assert schedule.instruction_count() > 0


def test_layer_too_wide_for_macro():
    model = build_model("wide", "x", 16, 8, [LayerSpec(LayerKind.CONV1D, out_channels=300)])
    with pytest.raises(LoweringError):
        lower(model, ScheduleFlags())

    deep = build_model("deep", "y", 16, 256, [LayerSpec(LayerKind.CONV1D, out_channels=8, kernel=3)])
    with pytest.raises(LoweringError):
        lower(deep, ScheduleFlags())


def test_geometry_counts_whole_words_per_tap():
    fits = build_model("edge", "x", 32, 64, [LayerSpec(LayerKind.CONV1D, out_channels=8, kernel=16)])
    check_geometry(fits)

    too_long = build_model("edge", "x", 32, 64, [LayerSpec(LayerKind.CONV1D, out_channels=8, kernel=17)])
    with pytest.raises(LoweringError):
        check_geometry(too_long)

    # 330 x 3 taps would fit 1024 wordlines densely, but each tap takes 11 whole words
    padded = build_model("padded", "x", 16, 330, [LayerSpec(LayerKind.CONV1D, out_channels=8, kernel=3)])
    with pytest.raises(LoweringError):
        check_geometry(padded)


def test_single_layer_fusion_changes_nothing(config):
    model = build_model("one", "x", 32, 8, [LayerSpec(LayerKind.CONV1D, out_channels=32)])
    baseline = lower(model, ScheduleFlags(), config.dram, config.latency)
    fused = lower(model, ScheduleFlags(layer_fusion=True), config.dram, config.latency)
    assert baseline.mnemonic_counts() == fused.mnemonic_counts()


def test_lowered_code_is_straight_line(config):
    for _, flags in LADDER:
        schedule = lower(_small_model(), flags, config.dram, config.latency)
        instructions = schedule.instructions()
        assert instructions[0].op == BaseOp.LUI and instructions[0].rd == REG_DMA_BASE
        for inst in instructions:
            assert not (isinstance(inst.op, BaseOp) and inst.op.is_branch)
            assert inst.op not in (BaseOp.JAL, BaseOp.JALR)
            assert inst.rd in LOWERED_REGISTERS
        assert len(schedule.program()) == len(instructions) + 1
        assert len(schedule.phase_map()) == len(instructions)


def test_empty_schedule_predicts_zero(config):
    schedule = Schedule(model=_small_model(), flags=ScheduleFlags(), items=())
    latency = predict_latency(schedule, config.dram)
    assert latency.total == 0
    assert all(latency[phase] == 0 for phase in Phase)


def test_weight_images_round_trip(tmp_path):
    rng = np.random.default_rng(20)
    model = _small_model()
    weights = random_weights(model, rng)
    paths = save_weight_images(str(tmp_path), model, weights)
    assert len(paths) == 2

    loaded = load_weight_images(str(tmp_path), model)
    assert sorted(loaded) == sorted(weights)
    for index in weights:
        assert (loaded[index] == weights[index]).all()

    with pytest.raises(MacroError):
        load_weight_images(str(tmp_path), model.with_mode("y"))


def test_schedule_runs_match_software_and_estimator(manager, config):
    rng = np.random.default_rng(21)
    model = _small_model()
    weights = random_weights(model, rng)
    bits = _random_input(rng, model)
    expected = golden_network(model, weights, bits)

    for _, flags in LADDER:
        schedule = lower(model, flags, config.dram, config.latency)
        run = manager.execute_schedule(schedule, weights, bits)
        assert (run.output_bits == expected).all()
        assert run.latency == predict_latency(schedule, config.dram, config.latency)
        assert run.latency.total == run.cycles


def test_zero_weights_give_zero_outputs(manager, config):
    model = _small_model("y")
    bits = np.ones((model.input_length, model.input_channels), dtype=np.uint8)
    schedule = lower(model, ScheduleFlags(layer_fusion=True, weight_fusion=True), config.dram, config.latency)
    run = manager.execute_schedule(schedule, zero_weights(model), bits)
    assert not run.output_bits.any()


def test_random_models_agree_across_configurations(manager, config):
    rng = np.random.default_rng(22)
    for trial in range(20):
        model = random_model(rng, mode="xy"[trial % 2])
        weights = random_weights(model, rng)
        bits = _random_input(rng, model)
        expected = golden_network(model, weights, bits)

        for _, flags in LADDER:
            schedule = lower(model, flags, config.dram, config.latency)
            run = manager.execute_schedule(schedule, weights, bits)
            assert (run.output_bits == expected).all(), "{} with {}".format(model.describe(), flags.name)
            assert run.cycles == predict_latency(schedule, config.dram, config.latency).total


def test_ladder_is_monotone(config):
    rng = np.random.default_rng(23)
    models = [_small_model()] + [random_model(rng) for _ in range(10)]
    for model in models:
        report = compare_configs(model, config)
        assert report.is_monotone()
        assert [step.name for step in report.steps] == [name for name, _ in LADDER]
        assert report.steps[0].reduction == 0.0

    for flags in (ScheduleFlags(weight_fusion=True), ScheduleFlags(pipeline=True)):
        single = predict_latency(lower(_small_model(), flags, config.dram), config.dram).total
        baseline = predict_latency(lower(_small_model(), ScheduleFlags(), config.dram), config.dram).total
        assert single <= baseline


def test_free_dram_keeps_the_ladder_monotone(manager, config):
    free = config.with_dram(latency_first_word=0, per_burst_word=0)
    report = compare_configs(_small_model(), free)
    assert report.is_monotone()
    assert report.steps[-1].reduction > 0

    rng = np.random.default_rng(24)
    model = _small_model()
    weights = random_weights(model, rng)
    schedule = lower(model, ScheduleFlags(layer_fusion=True, weight_fusion=True, pipeline=True), free.dram,
                     free.latency)
    run = SimulatorManager(free).execute_schedule(schedule, weights, _random_input(rng, model))
    assert run.cycles == predict_latency(schedule, free.dram, free.latency).total


def _cycles_saved(report):
    totals = [step.total for step in report.steps]
    return [before - after for before, after in zip(totals, totals[1:])]


def test_free_dram_shrinks_fusion_gains_only():
    config = load_config(os.path.join(ASSETS_PATH, "calibration.yaml"))
    priced = calibration_report(config)
    free = calibration_report(config.with_dram(latency_first_word=0, per_burst_word=0))

    fusion, weight_fusion, pipeline = _cycles_saved(priced)
    free_fusion, free_weight_fusion, free_pipeline = _cycles_saved(free)
    assert 0 < free_fusion < fusion
    assert 0 < free_weight_fusion < weight_fusion
    assert free_pipeline == pipeline > 0


def test_lower_applies_every_requested_flag():
    config = load_config(os.path.join(ASSETS_PATH, "calibration.yaml")).with_dram(latency_first_word=0,
                                                                                  per_burst_word=0)
    model = calibration_report(config).model
    flags = ScheduleFlags(layer_fusion=True, weight_fusion=True, pipeline=True)
    schedule = lower(model, flags, config.dram, config.latency)

    assert schedule.flags == flags
    directions = {item.direction for item in schedule.items if isinstance(item, DmaStartItem)}
    assert directions == {DmaDirection.DRAM_TO_WEIGHT}

    paired = lower(_small_model(), ScheduleFlags(pipeline=True), config.dram, config.latency)
    unpaired = lower(_small_model(), ScheduleFlags(), config.dram, config.latency)
    assert len(paired.block_sizes) < len(unpaired.block_sizes)


def test_reduction():
    assert reduction(200, 50) == 75.0
    assert reduction(0, 0) == 0.0


def test_calibration_report():
    config = load_config(os.path.join(ASSETS_PATH, "calibration.yaml"))
    report = calibration_report(config)

    assert report.model.name == "kws-calibration"
    assert report.is_monotone()
    assert all(step.reduction > 0 for step in report.steps[1:])
    assert report.total_target == 85.14
    assert abs(report.total_reduction - 85.14) <= 10
    assert [step.target for step in report.steps[1:]] == [33.16, 62.94, 40.00]

    values = report.as_kv()
    assert values["peak.tops"] == "26.21"
    assert values["ladder.monotone"] == "true"
    assert values["ladder.total.target"] == "85.14"
    assert int(values["ladder.pipeline.total"]) == report.steps[-1].total
    assert report.format_kv().count("\n") == len(values)
    assert "{:.2f}".format(report.total_reduction) in report.format_text()


def test_calibration_needs_a_model(config):
    with pytest.raises(ConfigError):
        calibration_report(config)
