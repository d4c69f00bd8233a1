"""Quantum password checking with symmetric states and the SWAP test."""
