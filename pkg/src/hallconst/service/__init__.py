"""HTTP service exposing the computations; see :mod:`.app`."""
