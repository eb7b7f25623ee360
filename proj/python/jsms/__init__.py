"""Python surface of the joint semantic/motion segmentation library.

Everything here is a thin numpy wrapper over the C++ core; see the package
README for the pipeline itself.
"""

try:
    from ._jsms import (
        ConfigError,
        DimensionError,
        FormatError,
        Pipeline,
        StateError,
        amplifier_from_flow,
        dilated_conv2d,
        flow_magnitude,
        generate_dataset,
        read_flo,
        resize_to_feature_grid,
        write_flo,
    )
except ImportError:  # running against a build tree, module on sys.path
    from _jsms import (
        ConfigError,
        DimensionError,
        FormatError,
        Pipeline,
        StateError,
        amplifier_from_flow,
        dilated_conv2d,
        flow_magnitude,
        generate_dataset,
        read_flo,
        resize_to_feature_grid,
        write_flo,
    )

__all__ = [
    "ConfigError",
    "DimensionError",
    "FormatError",
    "Pipeline",
    "StateError",
    "amplifier_from_flow",
    "dilated_conv2d",
    "flow_magnitude",
    "generate_dataset",
    "read_flo",
    "resize_to_feature_grid",
    "write_flo",
]
