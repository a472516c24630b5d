#!/usr/bin/env python3

#        CIM RISC-V Accelerator Simulator
#      Released under the MIT license
#

# Example script that runs keyword spotting end to end on a random audio
# frame with random weights, under every optimization configuration, and
# renders the final feature map to a PNG file.

import os

import numpy as np

from CimSim.Compiler.Ladder import LADDER
from CimSim.Compiler.Model import load_model
from CimSim.Compiler.Weights import random_weights
from CimSim.Config import ASSETS_PATH, load_config
from CimSim.ImageHelpers import PILHelper
from CimSim.Kws.Golden import golden_kws, golden_network
from CimSim.Kws.Pipeline import random_frame, run_end_to_end
from CimSim.Kws.Preprocess import preprocess_golden
from CimSim.SimulatorManager import SimulatorManager


if __name__ == "__main__":
    config = load_config()
    manager = SimulatorManager(config)
    model = load_model(os.path.join(ASSETS_PATH, "models", "kws_calibration.yaml"))

    rng = np.random.default_rng(7)
    weights = random_weights(model, rng)
    samples = random_frame(rng, model.input_length)

    scores, predicted = golden_kws(model, weights, samples, config.kws)
    print("Software reference: class {}, scores {}".format(predicted, list(scores)))

    for name, flags in LADDER:
        result = run_end_to_end(manager, model, weights, samples, flags)
        print("{:<14} class {} in {} cycles ({})".format(name, result.predicted, result.cycles, result.latency))

    bits = golden_network(model, weights, preprocess_golden(samples, config.kws))
    PILHelper.feature_map_image(bits, scale=8).save("kws_features.png")
    print("Final feature map written to kws_features.png")
