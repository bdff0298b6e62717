"""Continuous-time recurrent context encoders with TD3/SAC agents for POMDPs."""

__version__ = "0.1.0"
