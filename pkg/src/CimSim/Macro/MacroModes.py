#        CIM RISC-V Accelerator Simulator
#      Released under the MIT license
#

from .CimMacro import CimMacro, MacroError, MacroMode
from .CimMacroX import CimMacroX
from .CimMacroY import CimMacroY


MACRO_CLASSES: dict[MacroMode, type[CimMacro]] = {
    MacroMode.X: CimMacroX,
    MacroMode.Y: CimMacroY,
}


def parse_mode(mode: str | MacroMode) -> MacroMode:
    """
    Resolves a mode name ("x" or "y", any case) to a :class:`MacroMode`.
    """
    if isinstance(mode, MacroMode):
        return mode
    try:
        return MacroMode(str(mode).lower())
    except ValueError:
        raise MacroError("Unknown macro mode \"{}\".".format(mode))


def macro_class(mode: str | MacroMode) -> type[CimMacro]:
    """
    Looks up the macro class implementing a geometry mode.

    :param mode: Mode name or :class:`MacroMode`.

    :rtype: type
    :return: :class:`CimMacro` subclass for the mode.
    """
    return MACRO_CLASSES[parse_mode(mode)]
