"""Bidirectional invertible-network inverse kinematics toolkit."""

try:  # installed wheel: extension lives inside the package
    from ._kinflow import (
        Dataset,
        FlowIkModel,
        KinematicTree,
        NoiseConfig,
        PoseSample,
        analytic_ik,
        decompose_twists,
        fk_positions,
        generate_dataset,
        load_flow_checkpoint,
        matrix_to_rot6d,
        mpjpe_mm,
        pa_mpjpe_mm,
        read_dataset,
        root_align,
        rot6d_to_matrix,
        rot_geodesic_deg,
        run_cli,
        twist_swing_compose,
        twist_swing_decompose,
        write_dataset,
    )
except ImportError:  # build tree: extension on PYTHONPATH
    from _kinflow import (
        Dataset,
        FlowIkModel,
        KinematicTree,
        NoiseConfig,
        PoseSample,
        analytic_ik,
        decompose_twists,
        fk_positions,
        generate_dataset,
        load_flow_checkpoint,
        matrix_to_rot6d,
        mpjpe_mm,
        pa_mpjpe_mm,
        read_dataset,
        root_align,
        rot6d_to_matrix,
        rot_geodesic_deg,
        run_cli,
        twist_swing_compose,
        twist_swing_decompose,
        write_dataset,
    )

__all__ = [
    "Dataset",
    "FlowIkModel",
    "KinematicTree",
    "NoiseConfig",
    "PoseSample",
    "analytic_ik",
    "decompose_twists",
    "fk_positions",
    "generate_dataset",
    "load_flow_checkpoint",
    "matrix_to_rot6d",
    "mpjpe_mm",
    "pa_mpjpe_mm",
    "read_dataset",
    "root_align",
    "rot6d_to_matrix",
    "rot_geodesic_deg",
    "run_cli",
    "twist_swing_compose",
    "twist_swing_decompose",
    "write_dataset",
]
