"""Numerical tolerances used across the package.

Defaults are the contract values; a run config may override any field.
"""
from dataclasses import dataclass, fields, replace


@dataclass(frozen=True)
class Tolerances:
    row_sum: float = 1e-12
    stationary_residual: float = 1e-12  # relative to ||Q||
    identity: float = 1e-10
    zero_eigenvalue: float = 1e-9
    spectral_reconstruction: float = 1e-8
    condition_max: float = 1e14
    balance: float = 1e-12
    positive_definite: float = 1e-12
    resonance: float = 1e-9  # relative exponent equality
    decay: float = 1e-12  # Re(mu) must be below -decay for a decaying term
    coefficient_zero: float = 1e-13  # |C| below this counts as an absent term
    overflow_exponent: float = 700.0

    def with_overrides(self, overrides):
        known = {f.name for f in fields(self)}
        unknown = set(overrides) - known
        if unknown:
            raise KeyError(f"unknown tolerance(s): {sorted(unknown)}")
        return replace(self, **{k: float(v) for k, v in overrides.items()})

    def as_dict(self):
        return {f.name: getattr(self, f.name) for f in fields(self)}


DEFAULT_TOLERANCES = Tolerances()
