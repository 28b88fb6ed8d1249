from .bta import ThreadSpec, ThreadHandle, parse_spec, print_spec
from .lts import Lts, Transition

__all__ = ['ThreadSpec', 'ThreadHandle', 'parse_spec', 'print_spec', 'Lts', 'Transition']
