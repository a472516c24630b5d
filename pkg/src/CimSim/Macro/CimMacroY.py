#        CIM RISC-V Accelerator Simulator
#      Released under the MIT license
#

from .CimMacro import CimMacro, MacroMode


class CimMacroY(CimMacro):
    """
    Represents the macro in Y mode: fewer inputs, more outputs. The plus
    cells of every column sit in the lower half of the bitlines and the minus
    cells in the upper half.
    """

    WL_COUNT = 512
    BL_COUNT = 1024
    SA_COUNT = 512
    MODE = MacroMode.Y

    def _bitline_pair(self, column):
        return column, column + self.SA_COUNT
