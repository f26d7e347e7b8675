"""De Broglie-Bohm trajectories and ergodicity diagnostics for coupled
oscillators and a two-particle double-slit interferometer."""

__version__ = "0.1.0"
