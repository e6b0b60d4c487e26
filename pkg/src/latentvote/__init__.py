"""Test-time voting over randomly initialized latent trajectories.

Recurrent reasoning models (an iterated-attention network, a Kuramoto
oscillator network, and a feed-forward transformer control) trained on
generated Sudoku and Maze puzzles, with confidence- and energy-based
candidate selection at inference time.
"""

__version__ = "0.1.0"
