"""Experiment configuration: one dataclass tree, loadable from TOML.

Sections: [scene] (with [[scene.blockers]] and [[scene.lanes]] tables),
[array], [ofdm], [neural], [forest], [svm], [aoi], [protocol]. Anything left
out keeps the desk-scene default. ``TWINLINK_SEED`` in the environment
replaces every seed in the tree.
"""
from __future__ import annotations

import dataclasses
import math
import os
from dataclasses import dataclass, field
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from ..aoi import AoiConfig
from ..channel import ArrayConfig, OfdmConfig
from ..models import ForestConfig, NeuralConfig, SvmConfig
from ..scene import Blocker, SceneConfig, Vec3, lane_trajectories

SEED_ENV = "TWINLINK_SEED"


@dataclass(frozen=True)
class BlockerSpec:
    min: tuple[float, float, float]
    max: tuple[float, float, float]
    loss_db: float = 12.0
    id: str = ""

    def build(self) -> Blocker:
        return Blocker(Vec3(*self.min), Vec3(*self.max), self.loss_db, self.id)


@dataclass(frozen=True)
class LaneSpec:
    """A straight lane with ``count`` vehicles shuttling between its ends."""

    start: tuple[float, float]
    end: tuple[float, float]
    speed: float
    count: int
    dims: tuple[float, float, float] = (4.5, 1.8, 1.5)
    loss_db: float = 3.0
    phase: float = 0.0
    id: str = "veh"


@dataclass(frozen=True)
class SceneSpec:
    bs_position: tuple[float, float, float] = (30.0, 0.0, 21.7)
    boresight_deg: float = 90.0
    downtilt_deg: float = 2.0
    extent: tuple[float, float] = (60.0, 46.0)
    grid_cell: float = 2.0
    ue_height: float = 1.5
    sim_duration: float = 300.0
    sample_period: float = 0.1
    los_dropout_prob: float = 0.1
    max_paths: int = 6
    rng_seed: int = 0
    blockers: tuple[BlockerSpec, ...] = ()
    lanes: tuple[LaneSpec, ...] = ()

    def build(self, carrier_frequency: float) -> SceneConfig:
        trajs = []
        for lane in self.lanes:
            trajs += lane_trajectories((*lane.start, 0.0), (*lane.end, 0.0), lane.speed, lane.count,
                                       self.sim_duration, lane.dims, lane.loss_db, lane.phase, lane.id)
        return SceneConfig(
            bs_position=Vec3(*self.bs_position),
            bs_boresight_azimuth=math.radians(self.boresight_deg),
            bs_downtilt=math.radians(self.downtilt_deg),
            extent=tuple(self.extent),
            grid_cell=self.grid_cell,
            ue_height=self.ue_height,
            static_blockers=tuple(b.build() for b in self.blockers),
            lanes=tuple(trajs),
            sim_duration=self.sim_duration,
            sample_period=self.sample_period,
            los_dropout_prob=self.los_dropout_prob,
            max_paths=self.max_paths,
            rng_seed=self.rng_seed,
            carrier_frequency=carrier_frequency,
        )


@dataclass(frozen=True)
class ProtocolConfig:
    seed: int = 0
    pool: tuple[int, int] = (2, 4)
    dynamic_range_db: float = 60.0
    split_ratios: tuple[float, float, float] = (0.7, 0.2, 0.1)
    snr_sweep: tuple[float, ...] = (-15.0, -10.0, -5.0, 0.0, 5.0, 10.0, 15.0, 20.0, 25.0, 30.0)
    augment: bool = True
    augment_snr: float = 15.0
    sml: bool = True
    stage_times: tuple[float, ...] = (90.0, 190.0, 290.0)
    window: float = 10.0
    # "detection": ages measured at t_k; "window_end": at t_k + window
    age_reference: str = "detection"
    gammas: tuple[float, ...] = (0.01, 0.05, 0.1, 0.2, 0.4)
    drift_snr: float = math.inf

    def __post_init__(self):
        if self.age_reference not in ("detection", "window_end"):
            raise ValueError("age_reference must be 'detection' or 'window_end'")
        if list(self.stage_times) != sorted(set(self.stage_times)):
            raise ValueError("stage_times must be strictly increasing")


# static buildings: a front row casting shadows and a back row whose faces
# reflect into them; concrete-like loss keeps NLoS clearly weaker than LoS
DESK_BLOCKERS = (
    BlockerSpec((14, 10, 0), (24, 18, 12.5), 12.0, "A"),
    BlockerSpec((36, 12, 0), (46, 18, 12), 12.0, "B"),
    BlockerSpec((2, 22, 0), (8, 28, 14), 12.0, "C"),
    BlockerSpec((50, 24, 0), (56, 30, 10), 12.0, "D"),
    BlockerSpec((0, 46, 0), (26, 52, 18), 12.0, "E"),
    BlockerSpec((32, 46, 0), (60, 52, 16), 12.0, "F"),
)

# buses shadow the car lanes from the BS; metal trucks behind them hand the
# shadowed cars a strong reflection the static model has never seen
DESK_LANES = (
    LaneSpec((3, 33), (57, 33), 8.0, 3, (12.0, 2.5, 3.5), 1.0, 0.0, "bus"),
    LaneSpec((3, 35.8), (57, 35.8), 8.5, 6, (4.5, 1.8, 1.5), 3.0, 0.05, "cara"),
    LaneSpec((57, 38), (3, 38), 9.5, 6, (4.5, 1.8, 1.5), 3.0, 0.4, "carb"),
    LaneSpec((57, 41), (3, 41), 7.0, 3, (10.0, 2.5, 4.0), 1.0, 0.3, "truck"),
)


@dataclass(frozen=True)
class ExperimentConfig:
    scene: SceneSpec = field(default_factory=lambda: SceneSpec(blockers=DESK_BLOCKERS, lanes=DESK_LANES))
    array: ArrayConfig = ArrayConfig(n_v=4, n_h=8)
    ofdm: OfdmConfig = OfdmConfig(n_c=128)
    neural: NeuralConfig = NeuralConfig(learning_rate=1e-3, patience=10)
    forest: ForestConfig = ForestConfig()
    svm: SvmConfig = SvmConfig()
    aoi: AoiConfig = AoiConfig(gamma=0.4, threshold=0.005)
    protocol: ProtocolConfig = ProtocolConfig()

    def scene_config(self) -> SceneConfig:
        return self.scene.build(self.ofdm.f_c)

    def with_seed(self, seed: int) -> "ExperimentConfig":
        r = dataclasses.replace
        return r(self, scene=r(self.scene, rng_seed=seed), neural=r(self.neural, rng_seed=seed),
                 forest=r(self.forest, rng_seed=seed), protocol=r(self.protocol, seed=seed))

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["protocol"]["drift_snr"] = _num_out(self.protocol.drift_snr)
        return d


def desk_config() -> ExperimentConfig:
    return apply_env_seed(ExperimentConfig())


def light_config() -> ExperimentConfig:
    """Coarse-timed, few-vehicle variant for quick protocol runs."""
    lanes = (
        LaneSpec((3, 33), (57, 33), 8.0, 1, (12.0, 2.5, 3.5), 1.0, 0.0, "bus"),
        LaneSpec((3, 35.8), (57, 35.8), 8.5, 2, (4.5, 1.8, 1.5), 3.0, 0.05, "car"),
        LaneSpec((57, 41), (3, 41), 7.0, 1, (10.0, 2.5, 4.0), 1.0, 0.3, "truck"),
    )
    base = ExperimentConfig()
    cfg = dataclasses.replace(
        base,
        scene=dataclasses.replace(base.scene, lanes=lanes, sample_period=0.5),
        neural=dataclasses.replace(base.neural, head=(64, 32), max_epochs=3, patience=2),
        protocol=dataclasses.replace(base.protocol, snr_sweep=(0.0, 15.0)),
    )
    return apply_env_seed(cfg)


def apply_env_seed(cfg: ExperimentConfig) -> ExperimentConfig:
    raw = os.environ.get(SEED_ENV)
    if raw is None or raw.strip() == "":
        return cfg
    try:
        seed = int(raw)
    except ValueError:
        raise ValueError(f"{SEED_ENV} must be an integer, got {raw!r}") from None
    return cfg.with_seed(seed)


def _num_in(v):
    if isinstance(v, str) and v.lower() in ("inf", "+inf", "infinity"):
        return math.inf
    return v


def _num_out(v):
    return "inf" if isinstance(v, float) and math.isinf(v) else v


def _section(cls, data: dict, base, **convert):
    known = {f.name for f in dataclasses.fields(cls)}
    unknown = set(data) - known
    if unknown:
        raise ValueError(f"unknown keys for {cls.__name__}: {sorted(unknown)}")
    kw = {}
    for k, v in data.items():
        fn = convert.get(k)
        kw[k] = fn(v) if fn else (tuple(v) if isinstance(v, list) else _num_in(v))
    return dataclasses.replace(base, **kw)


def config_from_dict(d: dict) -> ExperimentConfig:
    base = ExperimentConfig()
    unknown = set(d) - {f.name for f in dataclasses.fields(ExperimentConfig)}
    if unknown:
        raise ValueError(f"unknown config sections: {sorted(unknown)}")
    scene = d.get("scene", {})
    scene_cfg = _section(
        SceneSpec, scene, base.scene,
        blockers=lambda bs: tuple(BlockerSpec(tuple(b["min"]), tuple(b["max"]), b.get("loss_db", 12.0),
                                              b.get("id", "")) for b in bs),
        lanes=lambda ls: tuple(LaneSpec(tuple(v["start"]), tuple(v["end"]), v["speed"], v["count"],
                                        tuple(v.get("dims", (4.5, 1.8, 1.5))), v.get("loss_db", 3.0),
                                        v.get("phase", 0.0), v.get("id", "veh")) for v in ls),
    )
    nested = lambda v: tuple(tuple(c) for c in v)  # noqa: E731
    return ExperimentConfig(
        scene=scene_cfg,
        array=_section(ArrayConfig, d.get("array", {}), base.array),
        ofdm=_section(OfdmConfig, d.get("ofdm", {}), base.ofdm),
        neural=_section(NeuralConfig, d.get("neural", {}), base.neural, conv_stack=nested),
        forest=_section(ForestConfig, d.get("forest", {}), base.forest),
        svm=_section(SvmConfig, d.get("svm", {}), base.svm),
        aoi=_section(AoiConfig, d.get("aoi", {}), base.aoi),
        protocol=_section(ProtocolConfig, d.get("protocol", {}), base.protocol),
    )


def load_config(path: str | Path | None) -> ExperimentConfig:
    """Read a TOML config (None -> desk defaults) and apply ``TWINLINK_SEED``."""
    if path is None:
        return desk_config()
    with open(path, "rb") as f:
        data = tomllib.load(f)
    return apply_env_seed(config_from_dict(data))
