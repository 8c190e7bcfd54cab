"""occloc: indoor smartphone localization over existing LED lighting.

Ceiling fixtures broadcast their coordinates as modulated light; a smartphone
camera decodes them, measures range from each fixture's projected pixel area,
and a lighting server trilaterates and Kalman-tracks the phone. This package
is the desk-scale simulator and library for that pipeline.
"""

__version__ = "0.1.0"

from .geometry import (
    CameraModel,
    Circular,
    Luminaire,
    Point3,
    Pose,
    Rectangular,
    RoomConfig,
    distance,
    incidence_angle,
)
from .channel import (
    LinkState,
    SensorNoiseModel,
    SpectralConfig,
    channel_capacity,
    channel_dc_gain,
    lambertian_order,
    luminous_flux,
    luminous_intensity,
    mimo_output,
    ook_ber_theoretical,
    pixel_ebn0,
    received_power,
    snir,
    transmitted_power,
)
from .imaging import (
    FeasibilityRegime,
    Projection,
    RangingConstant,
    Sighting,
    distance_from_pixels,
    feasibility,
    image_distance,
    observe_scene,
    pixel_count,
    project,
    ranging_constant,
    visible,
)
from .modem import (
    BadCrc,
    BadPreamble,
    FrameError,
    LedIdFrame,
    SampledWaveform,
    add_awgn,
    decode_frame,
    demodulate,
    encode_frame,
    measure_ber,
    modulate,
)
from .solver import (
    AnchorMeasurement,
    CollinearAnchors,
    CollinearFamily,
    DegenerateAnchors,
    InsufficientAnchors,
    LinearSystem,
    Method,
    NoFeasibleCandidate,
    NoRealRoot,
    PositionEstimate,
    RankDeficient,
    SolverError,
    build_system,
    estimate_position,
    multilaterate,
    resolve_ambiguity,
    trilaterate,
    trilaterate_collinear,
)
from .tracker import (
    KalmanConfig,
    KalmanState,
    constant_velocity_config,
    gain,
    initial_state,
    predict,
    track,
    update,
)
from .server import (
    DetectionPacket,
    DetectionRecord,
    IngestResult,
    LedRegistry,
    LightingServer,
    ProbePhase,
    ProbeStatus,
    SessionClosed,
    StaleTimestamp,
    UnknownLedId,
    packet_from_line,
    packet_to_line,
    replay_packet_log,
)
from .harness import (
    BerPoint,
    FilterComparisonPoint,
    FixtureSpec,
    RangePoint,
    RunRecord,
    Scenario,
    ScenarioError,
    VisibilityScan,
    default_filtercmp_scenario,
    default_scenario,
    range_boundaries_m,
    run_ber_sweep,
    run_filter_comparison,
    run_range_sweep,
    run_tracking,
    scenario_from_dict,
    scenario_to_dict,
    trajectory_point,
    visibility_scan,
)
