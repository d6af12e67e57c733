"""Reflected BSDE schemes and conformance checks for dynamic operators with a floor."""
