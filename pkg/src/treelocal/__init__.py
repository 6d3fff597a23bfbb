"""Monte Carlo laboratory for random-walk local times and the Gaussian free field on regular trees."""

from treelocal.errors import CapacityError, DomainError, NoMaximizerError
from treelocal.gff import GaussianField, centering, sample_gff
from treelocal.local_time import LocalTimeField, sample_leafstart_field, sample_root_field, simulate_ctmc
from treelocal.tree import ROOT, TreeShape, VertexRef

__version__ = "0.1.0"

__all__ = [
    "ROOT",
    "CapacityError",
    "DomainError",
    "GaussianField",
    "LocalTimeField",
    "NoMaximizerError",
    "TreeShape",
    "VertexRef",
    "centering",
    "sample_gff",
    "sample_leafstart_field",
    "sample_root_field",
    "simulate_ctmc",
]
