"""Front-view lidar projection, anchor-vote 3D proposals and KITTI-style evaluation."""

from ._anchorvote import (
    Box3D,
    Error,
    InvalidArgumentError,
    IoError,
    MalformedFileError,
    NumericError,
    Proposal,
    SchemaMismatchError,
    ShapeMismatchError,
    SyntheticScene,
    TruthObject,
    UndefinedApError,
    average_precision,
    bev_svg,
    contains,
    distill_demo,
    evaluate_csv,
    generate_scene,
    iou_3d,
    iou_3d_oracle,
    iou_bev,
    nms,
    occupancy,
    parse_config_keys,
    propose,
    viewpoint_decode,
    viewpoint_encode,
)

__all__ = [name for name in dir() if not name.startswith("_")]
