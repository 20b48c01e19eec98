"""jvsidecar: encoder sidecar for the jvsync scoring engine.

Serves per-window embeddings over a newline-delimited JSON protocol (stdio
or TCP) and precomputes embedding-store files so scoring can run offline.
Backends: the deterministic stub (bit-exact twin of the engine's own stub)
and optional CLIP/CLAP or ImageBind adapters.
"""

from .backends import BackendUnavailable, StubBackend, make_backend
from .precompute import precompute
from .server import SidecarConfig, serve
from .stubcore import canonical_key, stub_vector

__version__ = "0.1.0"
