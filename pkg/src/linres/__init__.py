"""Linear-response simulation of bosonic and fermionic correlation functions on qubits."""

__version__ = "0.1.0"
