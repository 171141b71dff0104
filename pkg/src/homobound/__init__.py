"""Sound piecewise-linear pixel bounds under camera-pose homographies."""
from .geometry import (
    CameraIntrinsics,
    PerturbationScenario,
    PixelCoord,
    PlaneWorld,
    Pose,
    ScenarioKind,
    critical_set,
    general_homography,
    gradient_sup_candidates,
    preimage,
    preimage_gradient,
    scenario_inverse_homography,
)
from .imaging import (
    Image,
    Padding,
    PixelCurveContext,
    bilinear,
    interp_gradient_bound,
    pixel_value,
    preimage_box,
    render,
    sample_padded,
)
from .bounds import (
    BoundConfig,
    BoundSet,
    LinearSegment,
    PiecewiseLinearBound,
    bound_image,
    bound_pixel,
    eps_max,
    fit_segment,
    lipschitz_constant,
    polytope_area,
    split_domain,
)
from .verifier import Network, load_network, verify_robust

__version__ = "0.1.0"
