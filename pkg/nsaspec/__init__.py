# Non-selfadjoint spectra package
