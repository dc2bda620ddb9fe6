"""Hybrid secure function evaluation: an enclave oracle for the rounds that
only touch one party's secrets, garbled circuits for the rest."""

__version__ = "0.1.0"
