"""Exceptions raised by the analysis and simulation routines."""


class NoAbsorptionError(ArithmeticError):
    """The tagged user (almost) never delivers within a frame, so the AoI diverges."""


class InsufficientCyclesError(ValueError):
    """A simulated trace holds too few delivery cycles for renewal statistics."""
