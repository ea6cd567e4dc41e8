"""Benchmark harness: instance sampling, raw vs layered runs, metrics and CSV output."""
