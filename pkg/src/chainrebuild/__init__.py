"""Exact chain-complex rebuilding calculus over the integers and group rings."""
