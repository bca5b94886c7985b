"""upliftbench: a reproducible benchmarking harness for two-head neural
uplift models - a seeded split/preprocessing/search protocol, four ranking
metrics, a 13-model zoo on a minimal autodiff engine, and a synthetic
generator with known true uplift."""

__version__ = "0.1.0"
