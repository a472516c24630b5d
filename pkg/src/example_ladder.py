#!/usr/bin/env python3

#        CIM RISC-V Accelerator Simulator
#      Released under the MIT license
#

# Example script that lowers the calibration network at every step of the
# optimization ladder, prints the predicted latencies, then checks one step
# against the cycle-accurate simulator.

import os

import numpy as np

from CimSim.Compiler.Ladder import calibration_report
from CimSim.Compiler.Weights import random_weights
from CimSim.Config import ASSETS_PATH, load_config
from CimSim.SimulatorManager import SimulatorManager


if __name__ == "__main__":
    config = load_config(os.path.join(ASSETS_PATH, "calibration.yaml"))
    report = calibration_report(config)

    print(report.format_text())

    # Simulate the fully optimized schedule and compare with its prediction.
    step = report.steps[-1]
    model = step.schedule.model
    rng = np.random.default_rng(1)
    weights = random_weights(model, rng)
    bits = rng.integers(0, 2, size=(model.input_length, model.input_channels), dtype=np.uint8)

    run = SimulatorManager(config).execute_schedule(step.schedule, weights, bits)
    print("Simulated {} cycles, predicted {}.".format(run.cycles, step.total))
