"""Scenario generation and end-to-end experiment loops.

A scenario describes one desk-scale room: an LED grid on the ceiling, a
camera model, a waypoint trajectory walked at constant speed, noise levels
and a seed. The loops reproduce the artifact's four experiments: a tracking
run, an OOK error-rate sweep, a ranging-feasibility sweep over distance, and
a filtered-versus-raw error comparison over a seeded ensemble.

Every loop is deterministic in the scenario seed; ensemble members derive
child seeds arithmetically so runs are reproducible byte for byte.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .geometry import (
    CameraModel,
    Circular,
    Luminaire,
    Point3,
    Pose,
    Rectangular,
    RoomConfig,
)
from .channel import ook_ber_theoretical
from .imaging import (
    FeasibilityRegime,
    feasibility,
    observe_scene,
    pixel_count,
    ranging_constant,
    distance_from_pixels,
)
from .modem import decode_frame, demodulate, encode_frame, measure_ber, modulate
from .server import (
    DetectionPacket,
    DetectionRecord,
    LedRegistry,
    LightingServer,
)
from .solver import SolverError
from .tracker import constant_velocity_config


class ScenarioError(ValueError):
    """A scenario file or dict that violates the configuration contract."""


# Desk-scale defaults: a 1600 sqft square room, the reference camera
# (5 mm focal length, 7.1e-3 mm pixel edge, 640x320, 120 degree cone, 30 fps,
# f/4 aperture) and a 170 mm circular downlight fixture.
DEFAULT_ROOM = dict(width_cm=1219.0, depth_cm=1219.0, ceiling_height_cm=300.0)
DEFAULT_APERTURE_AREA_MM2 = math.pi * (5.0 / 4.0 / 2.0) ** 2
DEFAULT_CAMERA = dict(
    focal_length_mm=5.0,
    pixel_edge_mm=7.1e-3,
    sensor_cols=640,
    sensor_rows=320,
    fov_full_angle_deg=120.0,
    frame_rate_fps=30.0,
    responsivity_a_per_w=0.5,
    optical_filter_gain=1.0,
    aperture_area_mm2=DEFAULT_APERTURE_AREA_MM2,
    pixel_size_um=1.0,
)
DEFAULT_FIXTURE = dict(
    shape="circular",
    radius_mm=85.0,
    width_mm=None,
    height_mm=None,
    area_mm2=22700.0,
    half_power_semi_angle_deg=20.0,
    center_intensity_cd=300.0,
    emitted_power_mw=1500.0,
)
# Pixel-area jitter that maps to roughly 5 cm of ranging noise at the nominal
# 2.3 m slant range of the default room (error grows with the cube of range).
DEFAULT_PIXEL_SIGMA = 100.0

TRACK_HEADER = "t_s,true_x,true_y,raw_x,raw_y,kf_x,kf_y,raw_err,kf_err,visible"
BER_HEADER = "snir_db,ber_sim,ber_theory"
RANGE_HEADER = "d_m,eta,regime"
FILTERCMP_HEADER = "t_s,err_kf_norm,err_raw_norm"


@dataclass(frozen=True)
class FixtureSpec:
    """Fixture template stamped onto every grid position."""

    shape: str = "circular"
    radius_mm: float | None = 85.0
    width_mm: float | None = None
    height_mm: float | None = None
    area_mm2: float | None = 22700.0
    half_power_semi_angle_deg: float = 20.0
    center_intensity_cd: float = 300.0
    emitted_power_mw: float = 1500.0

    def make_shape(self):
        if self.shape == "circular":
            if self.radius_mm is None:
                raise ScenarioError("circular fixture needs radius_mm")
            return Circular(self.radius_mm)
        if self.shape == "rectangular":
            if self.width_mm is None or self.height_mm is None:
                raise ScenarioError("rectangular fixture needs width_mm and height_mm")
            return Rectangular(self.width_mm, self.height_mm)
        raise ScenarioError(f"unknown fixture shape {self.shape!r}")

    def make_luminaire(self, led_id: int, anchor: Point3) -> Luminaire:
        return Luminaire(
            led_id=led_id,
            anchor=anchor,
            shape=self.make_shape(),
            half_power_semi_angle_deg=self.half_power_semi_angle_deg,
            center_intensity_cd=self.center_intensity_cd,
            emitted_power_mw=self.emitted_power_mw,
            area_mm2=self.area_mm2,
        )


@dataclass(frozen=True)
class Scenario:
    room: RoomConfig = field(default_factory=lambda: RoomConfig(**DEFAULT_ROOM))
    camera: CameraModel = field(default_factory=lambda: CameraModel(**DEFAULT_CAMERA))
    fixture: FixtureSpec = field(default_factory=FixtureSpec)
    led_spacing_cm: float = 150.0
    led_origin_cm: tuple[float, float] = (75.0, 75.0)
    explicit_led_xy_cm: tuple[tuple[float, float], ...] | None = None
    waypoints_cm: tuple[tuple[float, float, float], ...] = (
        (300.0, 300.0, 100.0),
        (900.0, 900.0, 100.0),
    )
    speed_cm_s: float = 10.0
    sampling_hz: float = 1.0
    duration_s: float = 50.0
    pixel_sigma: float = DEFAULT_PIXEL_SIGMA
    distance_sigma_cm: float = 0.0
    seed: int = 1

    def __post_init__(self):
        if self.sampling_hz <= 0:
            raise ScenarioError("sampling_hz must be positive")
        if self.led_spacing_cm <= 0:
            raise ScenarioError("led_spacing_cm must be positive")
        if self.duration_s <= 0:
            raise ScenarioError("duration_s must be positive")
        if self.speed_cm_s < 0:
            raise ScenarioError("speed_cm_s must be non-negative")
        if self.pixel_sigma < 0 or self.distance_sigma_cm < 0:
            raise ScenarioError("noise sigmas must be non-negative")
        if not (0 <= self.seed < 2**64):
            raise ScenarioError("seed must fit an unsigned 64-bit value")
        if not self.waypoints_cm:
            raise ScenarioError("trajectory needs at least one waypoint")
        for wp in self.waypoints_cm:
            x, y, z = wp
            if not (0 <= x <= self.room.width_cm and 0 <= y <= self.room.depth_cm):
                raise ScenarioError(f"waypoint {wp} leaves the room floor plan")
            if not (0 <= z < self.room.ceiling_height_cm):
                raise ScenarioError(f"waypoint {wp} is not below the ceiling")

    def build_luminaires(self) -> "list[Luminaire]":
        """Materialize the ceiling fixtures: explicit placements, or the grid."""
        ceiling = self.room.ceiling_height_cm
        if self.explicit_led_xy_cm is not None:
            coords = list(self.explicit_led_xy_cm)
        else:
            xs = np.arange(self.led_origin_cm[0], self.room.width_cm, self.led_spacing_cm)
            ys = np.arange(self.led_origin_cm[1], self.room.depth_cm, self.led_spacing_cm)
            coords = [(float(x), float(y)) for x in xs for y in ys]
        return [
            self.fixture.make_luminaire(i + 1, Point3(x, y, ceiling))
            for i, (x, y) in enumerate(coords)
        ]

    def tick_count(self) -> int:
        return int(round(self.duration_s * self.sampling_hz))


def trajectory_point(scenario: Scenario, t_s: float) -> Point3:
    """Truth position after walking the waypoint polyline for t_s seconds,
    clamped at the final waypoint."""
    wps = [Point3(*wp) for wp in scenario.waypoints_cm]
    if len(wps) == 1 or scenario.speed_cm_s == 0:
        return wps[0]
    target = scenario.speed_cm_s * t_s
    walked = 0.0
    for a, b in zip(wps, wps[1:]):
        seg = math.dist(a.as_tuple(), b.as_tuple())
        if walked + seg >= target and seg > 0:
            f = (target - walked) / seg
            return Point3(a.x + f * (b.x - a.x), a.y + f * (b.y - a.y), a.z + f * (b.z - a.z))
        walked += seg
    return wps[-1]


@dataclass(frozen=True)
class RunRecord:
    """One sample tick of a tracking run. Errors are horizontal (x, y)
    distances in cm; gap ticks (fewer than three usable detections, or a
    solver failure) carry NaN errors and no estimates."""

    t_s: float
    truth: Point3
    visible: int
    raw: Point3 | None
    filtered: Point3 | None
    predicted: Point3 | None
    raw_err_cm: float
    kf_err_cm: float
    cold_start: bool
    gap: bool


def _decoded_coordinates(luminaires) -> "dict[int, tuple[int, int]]":
    """Run every fixture's broadcast through the full modem chain once."""
    decoded = {}
    for lum in luminaires:
        bits = encode_frame(int(round(lum.anchor.x)), int(round(lum.anchor.y)))
        wave = modulate(bits, samples_per_bit=4)
        decoded[lum.led_id] = decode_frame(demodulate(wave))
    return decoded


def run_tracking(scenario: Scenario) -> "list[RunRecord]":
    """Walk the trajectory and push every tick through the full pipeline:
    observe pixel areas, decode fixture IDs, invert to distances, upload a
    packet, solve and filter on the server."""
    luminaires = scenario.build_luminaires()
    registry = LedRegistry.from_luminaires(luminaires)
    server = LightingServer(
        registry,
        scenario.room,
        kalman_config=constant_velocity_config(dt_s=1.0 / scenario.sampling_hz),
    )
    rng = np.random.default_rng(scenario.seed)
    by_id = {lum.led_id: lum for lum in luminaires}
    taus = {lum.led_id: ranging_constant(scenario.camera, lum) for lum in luminaires}
    coords = _decoded_coordinates(luminaires)

    records: list[RunRecord] = []
    for k in range(scenario.tick_count()):
        t_s = k / scenario.sampling_hz
        truth = trajectory_point(scenario, t_s)
        pose = Pose(truth)
        sightings = observe_scene(
            luminaires, pose, scenario.camera, scenario.pixel_sigma, rng
        )
        detections = []
        for sig in sightings:
            if sig.pixel_area <= 0:
                continue
            x_cm, y_cm = coords[sig.led_id]
            d_mm = distance_from_pixels(taus[sig.led_id], sig.pixel_area)
            if scenario.distance_sigma_cm > 0:
                d_mm += rng.normal(0.0, scenario.distance_sigma_cm * 10.0)
            if d_mm <= 0:
                continue
            detections.append(DetectionRecord(x_cm, y_cm, d_mm))

        if len(detections) < 3:
            records.append(
                RunRecord(t_s, truth, len(sightings), None, None, None,
                          math.nan, math.nan, False, True)
            )
            continue
        packet = DetectionPacket(
            "sim", int(round(1000.0 * k / scenario.sampling_hz)), tuple(detections)
        )
        try:
            result = server.ingest(packet)
        except SolverError:
            records.append(
                RunRecord(t_s, truth, len(sightings), None, None, None,
                          math.nan, math.nan, False, True)
            )
            continue
        raw = result.estimate.position
        records.append(
            RunRecord(
                t_s=t_s,
                truth=truth,
                visible=len(sightings),
                raw=raw,
                filtered=result.filtered,
                predicted=result.predicted,
                raw_err_cm=math.hypot(raw.x - truth.x, raw.y - truth.y),
                kf_err_cm=math.hypot(result.filtered.x - truth.x, result.filtered.y - truth.y),
                cold_start=result.cold_start,
                gap=False,
            )
        )
    return records


@dataclass(frozen=True)
class BerPoint:
    snir_db: float
    ber_sim: float
    ber_theory: float


def run_ber_sweep(snir_db_grid, n_bits: int, seed: int) -> "list[BerPoint]":
    """Monte-Carlo OOK error rate against the analytic curve per SNIR point."""
    if n_bits < 10_000:
        raise ValueError("need at least 1e4 bits per point")
    points = []
    for i, db in enumerate(snir_db_grid):
        lin = 10.0 ** (float(db) / 10.0)
        points.append(
            BerPoint(float(db), measure_ber(lin, n_bits, seed + i), ook_ber_theoretical(lin))
        )
    return points


@dataclass(frozen=True)
class RangePoint:
    d_m: float
    eta: float
    regime: FeasibilityRegime


def range_boundaries_m(camera: CameraModel, luminaire: Luminaire) -> tuple[float, float]:
    """Distances where ranging degrades (4 px) and becomes impossible (1 px):
    half the ranging constant, and the ranging constant itself."""
    tau_m = ranging_constant(camera, luminaire).tau_mm / 1000.0
    return tau_m / 2.0, tau_m


def run_range_sweep(camera: CameraModel, luminaire: Luminaire, d_grid_m) -> "list[RangePoint]":
    """Pixel area and feasibility regime along an ascending distance grid."""
    grid = [float(d) for d in d_grid_m]
    if any(b <= a for a, b in zip(grid, grid[1:])):
        raise ValueError("distance grid must be strictly ascending")
    points = []
    for d_m in grid:
        eta = pixel_count(camera, luminaire, d_m * 100.0)
        points.append(RangePoint(d_m, eta, feasibility(eta)))
    return points


@dataclass(frozen=True)
class FilterComparisonPoint:
    t_s: float
    err_kf_norm: float
    err_raw_norm: float


def _member_seed(base: int, member: int) -> int:
    return base * 1_000_003 + member


def run_filter_comparison(scenario: Scenario, ensemble_size: int = 100) -> "list[FilterComparisonPoint]":
    """Ensemble-mean error of the delivered next position, with and without the
    filter, normalized to the shared tick-0 error.

    The server's answer for tick k is consumed one interval later, so each
    pipeline is scored against the truth at tick k+1: the filtered pipeline
    delivers the one-step prediction, the raw pipeline its current solve. At
    tick 0 the cold-started filter predicts zero motion, so both answers (and
    both curves, after normalization) start at the same point.
    """
    if scenario.distance_sigma_cm <= 0:
        raise ValueError("filter comparison needs distance noise > 0")
    if ensemble_size < 1:
        raise ValueError("ensemble_size must be positive")
    n = scenario.tick_count()
    if n < 2:
        raise ValueError("scenario too short to compare")
    err_kf = np.full((ensemble_size, n - 1), np.nan)
    err_raw = np.full((ensemble_size, n - 1), np.nan)
    for j in range(ensemble_size):
        member = replace(scenario, seed=_member_seed(scenario.seed, j))
        records = run_tracking(member)
        for k in range(n - 1):
            rec = records[k]
            if rec.gap:
                continue
            truth_next = trajectory_point(scenario, (k + 1) / scenario.sampling_hz)
            err_kf[j, k] = math.hypot(
                rec.predicted.x - truth_next.x, rec.predicted.y - truth_next.y
            )
            err_raw[j, k] = math.hypot(rec.raw.x - truth_next.x, rec.raw.y - truth_next.y)
    mean_kf = np.nanmean(err_kf, axis=0)
    mean_raw = np.nanmean(err_raw, axis=0)
    return [
        FilterComparisonPoint(
            k / scenario.sampling_hz,
            float(mean_kf[k] / mean_kf[0]),
            float(mean_raw[k] / mean_raw[0]),
        )
        for k in range(n - 1)
    ]


@dataclass(frozen=True)
class VisibilityScan:
    min_visible: int
    worst_xy_cm: tuple[float, float]
    ok: bool


def visibility_scan(
    scenario: Scenario,
    step_cm: float = 10.0,
    margin_cm: float = 75.0,
    camera_height_cm: float = 100.0,
) -> VisibilityScan:
    """Exhaustive grid scan of how many fixtures each interior floor position
    sees; ok when every scanned point sees at least three."""
    luminaires = scenario.build_luminaires()
    anchors = np.array([[l.anchor.x, l.anchor.y] for l in luminaires])
    dz = scenario.room.ceiling_height_cm - camera_height_cm
    if dz <= 0:
        raise ValueError("camera must sit below the ceiling")
    reach = dz * math.tan(math.radians(scenario.camera.fov_semi_angle_deg))
    xs = np.arange(margin_cm, scenario.room.width_cm - margin_cm + 1e-9, step_cm)
    ys = np.arange(margin_cm, scenario.room.depth_cm - margin_cm + 1e-9, step_cm)
    gx, gy = np.meshgrid(xs, ys, indexing="ij")
    pts = np.column_stack([gx.ravel(), gy.ravel()])
    d2 = ((pts[:, None, :] - anchors[None, :, :]) ** 2).sum(axis=2)
    counts = (d2 <= reach * reach).sum(axis=1)
    worst = int(np.argmin(counts))
    return VisibilityScan(
        min_visible=int(counts[worst]),
        worst_xy_cm=(float(pts[worst, 0]), float(pts[worst, 1])),
        ok=bool(counts.min() >= 3),
    )


def _fmt(value) -> str:
    if isinstance(value, float):
        return repr(float(value))
    return str(value)


def _write_csv(path, header: str, rows):
    with open(path, "w", newline="") as fh:
        fh.write(header + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def write_track_csv(records: "list[RunRecord]", path):
    def cells(r: RunRecord):
        if r.gap:
            return (r.t_s, r.truth.x, r.truth.y, math.nan, math.nan, math.nan,
                    math.nan, math.nan, math.nan, r.visible)
        return (r.t_s, r.truth.x, r.truth.y, r.raw.x, r.raw.y, r.filtered.x,
                r.filtered.y, r.raw_err_cm, r.kf_err_cm, r.visible)

    _write_csv(path, TRACK_HEADER, (cells(r) for r in records))


def write_ber_csv(points: "list[BerPoint]", path):
    _write_csv(path, BER_HEADER, ((p.snir_db, p.ber_sim, p.ber_theory) for p in points))


def write_range_csv(points: "list[RangePoint]", path):
    _write_csv(path, RANGE_HEADER, ((p.d_m, p.eta, p.regime.value) for p in points))


def write_filtercmp_csv(points: "list[FilterComparisonPoint]", path):
    _write_csv(path, FILTERCMP_HEADER, ((p.t_s, p.err_kf_norm, p.err_raw_norm) for p in points))


def default_scenario() -> Scenario:
    """The reference tracking run: 10 cm/s diagonal walk, 1 Hz, 50 samples,
    pixel noise worth about 5 cm of ranging error."""
    return Scenario()


def default_filtercmp_scenario() -> Scenario:
    """Reference filter-comparison run: a brisker straight walk with direct
    5 cm distance noise, long enough to read the curves at t = 10 s."""
    return Scenario(
        waypoints_cm=((100.0, 300.0, 100.0), (1100.0, 300.0, 100.0)),
        speed_cm_s=40.0,
        duration_s=25.0,
        pixel_sigma=0.0,
        distance_sigma_cm=5.0,
        seed=7,
    )


# --- scenario <-> dict mapping (strict: unknown keys are rejected) ---------


def _strict(d: dict, allowed: "set[str]", where: str):
    unknown = set(d) - allowed
    if unknown:
        raise ScenarioError(f"unknown {where} fields: {', '.join(sorted(unknown))}")


def scenario_to_dict(s: Scenario) -> dict:
    return {
        "room": {
            "width_cm": s.room.width_cm,
            "depth_cm": s.room.depth_cm,
            "ceiling_height_cm": s.room.ceiling_height_cm,
        },
        "camera": {
            "focal_length_mm": s.camera.focal_length_mm,
            "pixel_edge_mm": s.camera.pixel_edge_mm,
            "sensor_cols": s.camera.sensor_cols,
            "sensor_rows": s.camera.sensor_rows,
            "fov_full_angle_deg": s.camera.fov_full_angle_deg,
            "frame_rate_fps": s.camera.frame_rate_fps,
            "responsivity_a_per_w": s.camera.responsivity_a_per_w,
            "optical_filter_gain": s.camera.optical_filter_gain,
            "aperture_area_mm2": s.camera.aperture_area_mm2,
            "pixel_size_um": s.camera.pixel_size_um,
        },
        "fixture": {
            "shape": s.fixture.shape,
            "radius_mm": s.fixture.radius_mm,
            "width_mm": s.fixture.width_mm,
            "height_mm": s.fixture.height_mm,
            "area_mm2": s.fixture.area_mm2,
            "half_power_semi_angle_deg": s.fixture.half_power_semi_angle_deg,
            "center_intensity_cd": s.fixture.center_intensity_cd,
            "emitted_power_mw": s.fixture.emitted_power_mw,
        },
        "led_grid": {
            "spacing_cm": s.led_spacing_cm,
            "origin_cm": list(s.led_origin_cm),
        },
        "luminaires": None
        if s.explicit_led_xy_cm is None
        else [list(xy) for xy in s.explicit_led_xy_cm],
        "trajectory": {
            "waypoints_cm": [list(wp) for wp in s.waypoints_cm],
            "speed_cm_s": s.speed_cm_s,
        },
        "sampling_hz": s.sampling_hz,
        "duration_s": s.duration_s,
        "noise": {
            "pixel_sigma": s.pixel_sigma,
            "distance_sigma_cm": s.distance_sigma_cm,
        },
        "seed": s.seed,
    }


def scenario_from_dict(data: dict) -> Scenario:
    """Build a scenario from a parsed config; absent fields take the desk-scale
    defaults, unknown fields raise ScenarioError naming themselves."""
    if not isinstance(data, dict):
        raise ScenarioError("scenario must be a JSON object")
    try:
        _strict(
            data,
            {"room", "camera", "fixture", "led_grid", "luminaires", "trajectory",
             "sampling_hz", "duration_s", "noise", "seed"},
            "scenario",
        )
        base = Scenario()

        room_d = data.get("room", {})
        _strict(room_d, set(DEFAULT_ROOM), "room")
        room = RoomConfig(**{**DEFAULT_ROOM, **room_d})

        cam_d = data.get("camera", {})
        _strict(cam_d, set(DEFAULT_CAMERA), "camera")
        camera = CameraModel(**{**DEFAULT_CAMERA, **cam_d})

        fix_d = data.get("fixture", {})
        _strict(fix_d, set(DEFAULT_FIXTURE), "fixture")
        merged = {**DEFAULT_FIXTURE, **fix_d}
        if merged["shape"] == "rectangular":
            # A rectangular override replaces the circular defaults wholesale.
            merged["radius_mm"] = fix_d.get("radius_mm")
            merged["area_mm2"] = fix_d.get("area_mm2")
        fixture = FixtureSpec(**merged)

        grid_d = data.get("led_grid", {})
        _strict(grid_d, {"spacing_cm", "origin_cm"}, "led_grid")
        spacing = grid_d.get("spacing_cm", base.led_spacing_cm)
        origin = tuple(grid_d.get("origin_cm", list(base.led_origin_cm)))
        if len(origin) != 2:
            raise ScenarioError("led_grid.origin_cm must be [x, y]")

        lums = data.get("luminaires")
        explicit = None if lums is None else tuple(tuple(map(float, xy)) for xy in lums)

        traj_d = data.get("trajectory", {})
        _strict(traj_d, {"waypoints_cm", "speed_cm_s"}, "trajectory")
        waypoints = tuple(
            tuple(map(float, wp))
            for wp in traj_d.get("waypoints_cm", [list(wp) for wp in base.waypoints_cm])
        )
        for wp in waypoints:
            if len(wp) != 3:
                raise ScenarioError(f"waypoint {list(wp)} must be [x, y, z]")

        noise_d = data.get("noise", {})
        _strict(noise_d, {"pixel_sigma", "distance_sigma_cm"}, "noise")

        return Scenario(
            room=room,
            camera=camera,
            fixture=fixture,
            led_spacing_cm=float(spacing),
            led_origin_cm=(float(origin[0]), float(origin[1])),
            explicit_led_xy_cm=explicit,
            waypoints_cm=waypoints,
            speed_cm_s=float(traj_d.get("speed_cm_s", base.speed_cm_s)),
            sampling_hz=float(data.get("sampling_hz", base.sampling_hz)),
            duration_s=float(data.get("duration_s", base.duration_s)),
            pixel_sigma=float(noise_d.get("pixel_sigma", base.pixel_sigma)),
            distance_sigma_cm=float(noise_d.get("distance_sigma_cm", base.distance_sigma_cm)),
            seed=int(data.get("seed", base.seed)),
        )
    except ScenarioError:
        raise
    except (TypeError, ValueError) as exc:
        raise ScenarioError(str(exc)) from exc
