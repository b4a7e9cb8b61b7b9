"""Matrix-free simulator for long-range Ising chains driven in linear ion traps."""

__version__ = "0.1.0"
