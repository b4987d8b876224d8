"""Discrete-time stochastic spiking networks with compositional trace semantics."""
