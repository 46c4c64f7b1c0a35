"""
nsa-spec Test Suite
===================

One test file per module of the nsaspec package.

To run all tests except the acceptance-scale ones:
    pytest tests/ -m "not slow"

To run with verbose output:
    pytest tests/ -v

To run a specific test file:
    pytest tests/test_model.py

To run a specific test:
    pytest tests/test_model.py::TestModelSpectrum::test_complex_harmonic_lattice
"""
