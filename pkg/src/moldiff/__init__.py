"""moldiff: latent-space molecular graph generation laboratory."""

__version__ = "0.1.0"

from . import chem, codec, diffcore, flows, gnn, harness

__all__ = ["chem", "codec", "diffcore", "flows", "gnn", "harness", "__version__"]
