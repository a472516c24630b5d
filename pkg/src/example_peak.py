#!/usr/bin/env python3

#        CIM RISC-V Accelerator Simulator
#      Released under the MIT license
#

# Example script that prints the geometry and peak throughput of every CIM
# macro mode.

from CimSim.Config import load_config
from CimSim.Macro.MacroModes import MACRO_CLASSES


# Prints the geometry of a given macro mode.
def print_macro_info(mode, macro_class, clock_mhz):
    print("Mode {}.".format(mode.name))
    print("\t - Wordlines: {}".format(macro_class.WL_COUNT))
    print("\t - Bitlines: {}".format(macro_class.BL_COUNT))
    print("\t - Sense amplifiers: {}".format(macro_class.SA_COUNT))
    print("\t - Weight segments: {} ({} per column)".format(
        macro_class.segment_count(),
        macro_class.segments_per_column()))
    print("\t - Peak: {} ops/cycle, {:.2f} TOPS at {} MHz".format(
        macro_class.peak_ops_per_cycle(),
        macro_class.peak_tops(clock_mhz),
        clock_mhz))


if __name__ == "__main__":
    config = load_config()

    for mode, macro_class in MACRO_CLASSES.items():
        print_macro_info(mode, macro_class, config.clock_mhz)
