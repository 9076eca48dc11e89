"""Ground-plane geometry, density maps and risk metrics for social-distancing analysis."""

from .errors import (
    BevkitError,
    DegenerateGeometryError,
    DegeneratePlaneError,
    DimensionMismatchError,
    FrameMismatchError,
    InfeasibleConfigError,
    KernelTooLargeError,
    UndefinedMetricError,
)
from .geometry import (
    BevGrid,
    CameraIntrinsics,
    CameraPose,
    Homography,
    bev_from_world,
    closed_form_scale,
    image_from_bev,
    image_from_world,
    make_bev_grid,
    rescale_intrinsics,
    world_from_bev,
)
from .metrics import (
    LocalizationResult,
    chamfer,
    evaluate_batch,
    extract_locations,
    global_risk_mse,
    risk_iou,
)
from .objective import LossWeights, heatmap_loss, pose_loss, total_loss
from .raster import (
    Frame,
    Heatmap,
    KeypointSet,
    RasterConfig,
    RasterMode,
    bev_points_from_feet,
    count,
    rasterize,
)
from .risk import RiskConfig, global_risk, individual_risks, risk_map, risk_mask
from .simulator import Person, Scene, SceneConfig, annotate, ground_truth_bundle, sample_scene
from .warp import (
    AttentionWeights,
    PlaneStack,
    group_warp_heads,
    softmax_normalize,
    warp_to_bev,
)

__version__ = "0.1.0"
