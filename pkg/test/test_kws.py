#!/usr/bin/env python3

#        CIM RISC-V Accelerator Simulator
#      Released under the MIT license
#

import os
import sys

import numpy as np
import pytest

sys.path.insert(0, os.path.join(os.path.dirname(__file__), '../src'))

from CimSim.Compiler.Ladder import LADDER
from CimSim.Compiler.Model import LayerKind, LayerSpec, ModelError, build_model
from CimSim.Compiler.Schedule import FmBuffer, Phase, ScheduleFlags
from CimSim.Compiler.Weights import random_weights, zero_weights
from CimSim.Compiler.Lowering import lower
from CimSim.Config import KwsConfig, load_config
from CimSim.Isa.Instruction import HALT, encode
from CimSim.Kws.Golden import golden_kws
from CimSim.Kws.Pipeline import kws_program, load_pcm, random_frame, run_end_to_end, save_pcm
from CimSim.Kws.Postprocess import MAX_CLASSES, gap_golden, gap_program, predict_class, read_scores
from CimSim.Kws.Preprocess import audio_word, place_audio, preprocess_golden, preprocess_program
from CimSim.SimulatorManager import SimulatorManager

CUSTOM = KwsConfig(input_channels=4, hp_alpha_q15=16384, bn_scale_q15=(32767, -32768, 12345, 0),
                   bn_shift=(0, 100, -3000, 5), quant_threshold=-7)


@pytest.fixture(scope="module")
def manager():
    return SimulatorManager(load_config())


def _kws_model(length=48, n_classes=10):
    layers = [
        LayerSpec(LayerKind.CONV1D, out_channels=16, kernel=3),
        LayerSpec(LayerKind.MAXPOOL, pool_width=2),
        LayerSpec(LayerKind.WEIGHT_UPDATE),
        LayerSpec(LayerKind.CONV1D, out_channels=12, kernel=3),
        LayerSpec(LayerKind.GAP),
    ]
    return build_model("kws-small", "x", length, 8, layers, n_classes)


def _run_front_end(manager, samples, params):
    unit = manager.build()
    place_audio(unit.fm_sram, samples)
    unit.core.load_program([encode(inst) for inst in preprocess_program(len(samples), params)] + [encode(HALT)])
    unit.run()

    words = unit.fm_sram.read_words(0, len(samples)).astype(np.uint64)
    bits = (words[:, None] >> np.arange(params.input_channels, dtype=np.uint64)) & 1
    return bits.astype(np.uint8), unit


def _run_gap(manager, buffer, bits, n_classes):
    unit = manager.build()
    buffer.write_bits(unit.fm_sram.words, bits)
    unit.core.load_program([encode(inst) for inst in gap_program(buffer, n_classes)] + [encode(HALT)])
    unit.run()
    return read_scores(unit.weight_sram, n_classes)


def test_zero_frame_features_are_the_shifts():
    params = load_config().kws
    bits = preprocess_golden(np.zeros(5, dtype=np.int16), params)
    assert bits.shape == (5, 8)
    assert (bits == [1, 1, 1, 1, 0, 0, 0, 0]).all()

    unshifted = KwsConfig(bn_shift=(0,) * 8)
    assert not preprocess_golden(np.zeros(5, dtype=np.int16), unshifted).any()


def test_constant_frame_is_high_passed():
    params = KwsConfig(input_channels=2, hp_alpha_q15=31785, bn_scale_q15=(32767, 32767), bn_shift=(-500, -20))
    bits = preprocess_golden(np.full(6, 1000, dtype=np.int16), params)

    # y[0] = 1000, then 1000 - (31785 * 1000 >> 15) = 30
    assert list(bits[:, 0]) == [1, 0, 0, 0, 0, 0]
    assert list(bits[:, 1]) == [1, 1, 1, 1, 1, 1]


def test_front_end_program_matches_reference(manager):
    rng = np.random.default_rng(30)
    for params in (load_config().kws, CUSTOM):
        for length in (1, 2, 37):
            samples = random_frame(rng, length)
            bits, _ = _run_front_end(manager, samples, params)
            assert (bits == preprocess_golden(samples, params)).all()


def test_front_end_extreme_samples(manager):
    samples = np.array([32767, -32768, -32768, 32767, 0, -1], dtype=np.int16)
    for params in (load_config().kws, CUSTOM):
        bits, _ = _run_front_end(manager, samples, params)
        assert (bits == preprocess_golden(samples, params)).all()


def test_front_end_leaves_audio_in_place(manager):
    samples = np.arange(-5, 6, dtype=np.int16)
    _, unit = _run_front_end(manager, samples, load_config().kws)
    offset = 4 * audio_word(len(samples))
    assert (unit.fm_sram.bytes[offset:offset + 2 * len(samples)].view("<i2") == samples).all()


def test_audio_must_fit(manager):
    unit = manager.build()
    with pytest.raises(ModelError):
        place_audio(unit.fm_sram, np.zeros(6000, dtype=np.int16))
    with pytest.raises(ModelError):
        preprocess_program(0, load_config().kws)


def test_gap_program_matches_reference(manager):
    rng = np.random.default_rng(31)
    for buffer, n_classes in ((FmBuffer(100, 10, 40, 8), 40), (FmBuffer(200, 7, 20, 8, 3), 12),
                              (FmBuffer(0, 1, 1, 1), 1)):
        bits = rng.integers(0, 2, size=(buffer.rows, buffer.channels)).astype(np.uint8)
        scores, predicted = _run_gap(manager, buffer, bits, n_classes)
        expected = gap_golden(bits, n_classes)
        assert (scores == expected).all()
        assert predicted == predict_class(expected)


def test_gap_one_hot_and_ties(manager):
    buffer = FmBuffer(0, 6, 8, 1)
    bits = np.zeros((6, 8), dtype=np.uint8)
    bits[:, 3] = 1
    assert _run_gap(manager, buffer, bits, 8)[1] == 3

    bits[:, 5] = 1
    assert _run_gap(manager, buffer, bits, 8)[1] == 3

    scores, predicted = _run_gap(manager, buffer, np.zeros((6, 8), dtype=np.uint8), 8)
    assert not scores.any()
    assert predicted == 0


def test_gap_class_bounds():
    buffer = FmBuffer(0, 4, 16, 1)
    with pytest.raises(ModelError):
        gap_program(buffer, 0)
    with pytest.raises(ModelError):
        gap_program(buffer, 17)
    with pytest.raises(ModelError):
        gap_program(FmBuffer(0, 1, 512, 16), MAX_CLASSES + 1)
    with pytest.raises(ModelError):
        gap_golden(np.zeros((4, 16)), 17)


def test_program_phases_cover_every_instruction():
    config = load_config()
    model = _kws_model()
    schedule = lower(model, ScheduleFlags(layer_fusion=True), config.dram, config.latency)
    words, phases = kws_program(schedule, config.kws)

    assert len(words) == len(phases) + 1
    assert sorted(phases) == list(range(0, 4 * len(phases), 4))
    assert phases[0] == Phase.PRE_POST
    assert phases[4 * (len(phases) - 1)] == Phase.PRE_POST
    assert Phase.CONV in phases.values()


def test_end_to_end_matches_software(manager):
    rng = np.random.default_rng(32)
    model = _kws_model()
    params = manager.config.kws

    for trial in range(100):
        weights = random_weights(model, rng)
        samples = random_frame(rng, model.input_length)
        expected_scores, expected_class = golden_kws(model, weights, samples, params)

        _, flags = LADDER[trial % len(LADDER)]
        result = run_end_to_end(manager, model, weights, samples, flags)
        assert (result.scores == expected_scores).all()
        assert result.predicted == expected_class
        assert result.latency.total == result.cycles
        assert result.latency[Phase.PRE_POST] > 0


def test_end_to_end_agrees_across_configurations(manager):
    rng = np.random.default_rng(33)
    model = _kws_model()
    weights = random_weights(model, rng)
    samples = random_frame(rng, model.input_length)

    results = [run_end_to_end(manager, model, weights, samples, flags) for _, flags in LADDER]
    for result in results[1:]:
        assert (result.scores == results[0].scores).all()
        assert result.predicted == results[0].predicted
    assert results[-1].cycles <= results[0].cycles


def test_zero_weights_predict_class_zero(manager):
    rng = np.random.default_rng(34)
    model = _kws_model()
    result = run_end_to_end(manager, model, zero_weights(model), random_frame(rng, model.input_length),
                            ScheduleFlags(), trace=True)
    assert not result.scores.any()
    assert result.predicted == 0
    assert len(result.trace) > 0

    values = result.as_kv()
    assert values["kws.predicted"] == "0"
    assert values["kws.cycles"] == str(result.cycles)
    assert values["kws.latency.total"] == str(result.cycles)
    assert "kws.score.9" in values


def test_end_to_end_rejects_bad_inputs(manager):
    model = _kws_model()
    weights = zero_weights(model)
    with pytest.raises(ModelError):
        run_end_to_end(manager, model, weights, np.zeros(47, dtype=np.int16), ScheduleFlags())

    headless = build_model("headless", "x", 48, 8, [LayerSpec(LayerKind.CONV1D, out_channels=16)])
    with pytest.raises(ModelError):
        run_end_to_end(manager, headless, zero_weights(headless), np.zeros(48, dtype=np.int16), ScheduleFlags())

    narrow = build_model("narrow", "x", 48, 4, [LayerSpec(LayerKind.CONV1D, out_channels=16), LayerSpec(LayerKind.GAP)],
                         n_classes=4)
    with pytest.raises(ModelError):
        run_end_to_end(manager, narrow, zero_weights(narrow), np.zeros(48, dtype=np.int16), ScheduleFlags())


def test_pcm_files_are_fitted_to_the_frame(tmp_path):
    path = str(tmp_path / "frame.pcm")
    save_pcm(path, [1, -2, 3])

    assert list(load_pcm(path, 5)) == [1, -2, 3, 0, 0]
    assert list(load_pcm(path, 2)) == [1, -2]
    assert load_pcm(path, 3).dtype == np.int16
