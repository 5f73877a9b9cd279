"""Branching automata over series-parallel posets, with the full effective
theory: membership, emptiness, boolean closure including complementation,
rational sp-expressions, a semilinear/Presburger engine, P-MSO model
checking and compilation, and Presburger-branching automata."""

__version__ = "0.1.0"
