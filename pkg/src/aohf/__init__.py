"""Hartree-Fock in a nonorthogonal AO basis, formulated on the density matrix."""

from importlib import resources

from .integrals import (AoSystem, SpatialSystem, TwoElectronTensor, expand_spatial_to_spin,
                        parse_aoints, random_system, read_aoints, write_aoints)
from .scf import ScfOptions, ScfSolution, scf_density_descent, scf_roothaan, verify_equivalence

__version__ = "0.1.0"


def fixture_path(name: str = "toy-heh.aoints"):
    """Path to a bundled AOINTS fixture."""
    return resources.files(__name__) / "data" / name


__all__ = [
    "AoSystem", "SpatialSystem", "TwoElectronTensor", "ScfOptions", "ScfSolution",
    "expand_spatial_to_spin", "fixture_path", "parse_aoints", "random_system",
    "read_aoints", "scf_density_descent", "scf_roothaan", "verify_equivalence",
    "write_aoints",
]
