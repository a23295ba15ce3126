"""Constructive Schoenflies-type extensions of bi-Lipschitz Sobolev homeomorphisms
between collared domains, with numerical verifiers for every step."""

__version__ = "0.1.0"
