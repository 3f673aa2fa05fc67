"""Spectral-domain pruning, sparse Hadamard simulation and throughput modeling."""
