"""uvbake: bake front/back photographs onto the UV atlas of a posed body mesh."""

from uvbake.errors import (
    BehindCameraError,
    DegenerateError,
    EmptySetError,
    MeshFormatError,
    StageError,
    UvbakeError,
    ValidationError,
)
from uvbake.geometry import (
    Mesh,
    PerspectiveCamera,
    WeakPerspectiveCamera,
    barycentric,
    compute_vertex_normals,
    load_mesh,
    project,
    view_vector,
)

__version__ = "0.1.0"

__all__ = [
    "BehindCameraError",
    "DegenerateError",
    "EmptySetError",
    "MeshFormatError",
    "StageError",
    "UvbakeError",
    "ValidationError",
    "Mesh",
    "PerspectiveCamera",
    "WeakPerspectiveCamera",
    "barycentric",
    "compute_vertex_normals",
    "load_mesh",
    "project",
    "view_vector",
]
