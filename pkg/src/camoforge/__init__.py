"""Circuit camouflaging toolkit: netlists, obfuscating transforms, device
fault models, simulation and the oracle-guided SAT attack."""

from .netlist import Flop, Gate, Netlist, parse_netlist, serialize_netlist, topological_order, validate
from .obfuscate import Secret, realize
from .physics import EffectClass
from .simulate import Oracle, evaluate, equivalent, truth_table

__version__ = "0.1.0"
