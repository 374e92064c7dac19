"""Cross-view LiDAR augmentation, occupancy consistency, and segmentation metrics."""

try:
    from cvgc import _cvgc as _impl
except ImportError:
    # CMake-built module on PYTHONPATH (development tree, no install)
    import _cvgc as _impl

__all__ = [
    "CvgcError",
    "build_occupancy",
    "cga",
    "densify",
    "estimate_mean_spacing",
    "gcr_demo",
    "knn",
    "miou",
    "read_cloud",
    "sparsify",
    "synthetic_scene",
    "visibility_filter",
    "voxel_index",
    "write_cloud",
]

for _name in __all__:
    globals()[_name] = getattr(_impl, _name)
del _name
