#        CIM RISC-V Accelerator Simulator
#      Released under the MIT license
#

from .CimMacro import CimMacro, MacroMode


class CimMacroX(CimMacro):
    """
    Represents the macro in X mode: many inputs, fewer outputs.
    """

    WL_COUNT = 1024
    BL_COUNT = 512
    SA_COUNT = 256
    MODE = MacroMode.X

    def _bitline_pair(self, column):
        return 2 * column, 2 * column + 1
