from pydantic import BaseModel, Field, field_validator, model_validator
from typing import Optional, List, Dict, Tuple
from pathlib import Path
from enum import Enum

# Highest intermediate block index usable on a ViT-B backbone (blocks 1..11)
MAX_ENCODER_LAYER = 11
DEFAULT_FIDELITY_LAYERS = [2, 7, 8, 11]
DEFAULT_MATRIX_ROWS = [0, 2, 4, 7]


class Region(str, Enum):
    """Which part of the scene a stroke or sketch belongs to."""
    foreground = "foreground"
    background = "background"
    combined = "combined"


class EncoderBackend(str, Enum):
    clip_vit_b32 = "clip_vit_b32"
    clip_vit_b16 = "clip_vit_b16"
    toy = "toy"


class RasterBackend(str, Enum):
    soft = "soft"
    diffvg = "diffvg"


class SaliencyBackend(str, Enum):
    u2net = "u2net"
    luminance = "luminance"


class InpaintBackend(str, Enum):
    lama = "lama"
    telea = "telea"


def _validate_layers(v: List[int]) -> List[int]:
    if not v:
        raise ValueError("at least one fidelity layer is required")
    bad = [layer for layer in v if not 1 <= layer <= MAX_ENCODER_LAYER]
    if bad:
        raise ValueError(f"layer indices {bad} outside 1..{MAX_ENCODER_LAYER}")
    if len(set(v)) != len(v):
        raise ValueError("fidelity layers must be unique")
    return v


class EncoderSpec(BaseModel):
    """Perceptual encoder selection plus the layers that drive the fidelity loss."""
    backend: EncoderBackend = EncoderBackend.clip_vit_b32
    layers_fidelity: List[int] = Field(default_factory=lambda: list(DEFAULT_FIDELITY_LAYERS))
    layer_geometry: Optional[int] = 4
    input_size: int = Field(224, ge=16)

    class Config:
        extra = "forbid"

    @field_validator("layers_fidelity")
    @classmethod
    def _check_layers(cls, v: List[int]) -> List[int]:
        return _validate_layers(v)

    @field_validator("layer_geometry")
    @classmethod
    def _check_geometry_layer(cls, v: Optional[int]) -> Optional[int]:
        if v is not None and not 1 <= v <= MAX_ENCODER_LAYER:
            raise ValueError(f"geometry layer {v} outside 1..{MAX_ENCODER_LAYER}")
        return v


class TrainConfig(BaseModel):
    """Hyper-parameters for one matrix build."""
    n_strokes: int = Field(64, ge=1)
    iters_fidelity: int = Field(2000, ge=0)
    iters_per_simplify: int = Field(500, ge=1)
    learning_rate: float = Field(1e-4, gt=0)
    adam_betas: Tuple[float, float] = (0.9, 0.999)
    augmentations_per_step: int = Field(4, ge=1)
    perspective_distortion: float = Field(0.3, ge=0, le=1)
    crop_scale: Tuple[float, float] = (0.8, 1.0)
    fidelity_layers: List[int] = Field(default_factory=lambda: list(DEFAULT_FIDELITY_LAYERS))
    simplify_levels: int = Field(8, ge=1)
    matrix_rows: Optional[List[int]] = None
    seed: int = 0
    hidden_width: int = Field(512, ge=1)
    canvas_size: int = Field(224, ge=1)
    base_width: float = Field(1.5, gt=0)
    drop_threshold: float = Field(0.1, ge=0, lt=1)
    finetune_loc_during_simplify: bool = True
    fg_geometry_layer: Optional[int] = 4
    use_geometry_layer: bool = True
    gradnorm_alpha: float = Field(0.12, ge=0)
    gradnorm_max_weight: float = Field(10.0, gt=0)
    simp_init_probability: float = Field(0.95, gt=0, lt=1)
    shared_simplify_step: Optional[float] = Field(None, gt=0)
    shared_factors: bool = False
    step_overrides: Dict[str, Dict[int, float]] = Field(default_factory=dict)
    log_every: int = Field(100, ge=1)

    class Config:
        extra = "forbid"

    @field_validator("fidelity_layers")
    @classmethod
    def _check_layers(cls, v: List[int]) -> List[int]:
        return _validate_layers(v)

    @field_validator("crop_scale")
    @classmethod
    def _check_crop(cls, v: Tuple[float, float]) -> Tuple[float, float]:
        lo, hi = v
        if not 0 < lo <= hi <= 1:
            raise ValueError("crop_scale must satisfy 0 < low <= high <= 1")
        return v

    @field_validator("step_overrides")
    @classmethod
    def _check_overrides(cls, v: Dict[str, Dict[int, float]]) -> Dict[str, Dict[int, float]]:
        valid = {Region.foreground.value, Region.background.value}
        for region, table in v.items():
            if region not in valid:
                raise ValueError(f"unknown region '{region}' in step_overrides")
            for layer, step in table.items():
                if step <= 0:
                    raise ValueError(f"step for layer {layer} must be positive")
        return v

    @model_validator(mode="after")
    def _resolve_rows(self) -> "TrainConfig":
        if self.matrix_rows is None:
            self.matrix_rows = [r for r in DEFAULT_MATRIX_ROWS if r <= self.simplify_levels]
        else:
            bad = [r for r in self.matrix_rows if not 0 <= r <= self.simplify_levels]
            if bad:
                raise ValueError(f"matrix_rows {bad} outside 0..{self.simplify_levels}")
        return self

    @property
    def geometry_layer(self) -> Optional[int]:
        return self.fg_geometry_layer if self.use_geometry_layer else None


class BackendConfig(BaseModel):
    encoder: EncoderBackend = EncoderBackend.clip_vit_b32
    eval_encoder: EncoderBackend = EncoderBackend.clip_vit_b16
    raster: RasterBackend = RasterBackend.soft
    saliency: SaliencyBackend = SaliencyBackend.u2net
    inpaint: InpaintBackend = InpaintBackend.lama
    clip_weights: Optional[Path] = None
    u2net_weights: Optional[Path] = None
    lama_weights: Optional[Path] = None
    softness: float = Field(1.0, gt=0)

    class Config:
        extra = "forbid"

    @classmethod
    def toy(cls) -> "BackendConfig":
        """Backends that need no network access and no weight files."""
        return cls(
            encoder=EncoderBackend.toy,
            eval_encoder=EncoderBackend.toy,
            raster=RasterBackend.soft,
            saliency=SaliencyBackend.luminance,
            inpaint=InpaintBackend.telea,
        )


class OutputConfig(BaseModel):
    out_dir: Path = Path("runs/latest")
    mask_path: Optional[Path] = None
    keep_partial: bool = False
    jobs: int = Field(1, ge=1)

    class Config:
        extra = "forbid"


class RunConfig(BaseModel):
    """Everything a run needs; written verbatim into the manifest."""
    train: TrainConfig = Field(default_factory=TrainConfig)
    encoder: EncoderSpec = Field(default_factory=EncoderSpec)
    backends: BackendConfig = Field(default_factory=BackendConfig)
    output: OutputConfig = Field(default_factory=OutputConfig)

    class Config:
        extra = "forbid"

    @model_validator(mode="after")
    def _sync_encoder(self) -> "RunConfig":
        # The train section owns the layer choice; the encoder spec mirrors it
        self.encoder.backend = self.backends.encoder
        self.encoder.layers_fidelity = list(self.train.fidelity_layers)
        self.encoder.layer_geometry = self.train.geometry_layer
        return self


class LossBreakdown(BaseModel):
    """Scalar values of one simplification objective evaluation."""
    clip_loss: float = Field(ge=0)
    sparse_loss: float = Field(ge=0, le=1)
    ratio_loss: float = Field(ge=0)
    total: float
    weights: List[float]


class LossRecord(BaseModel):
    """One row of losses.csv."""
    region: Region
    layer: int
    level: int
    iteration: int
    clip: float
    sparse: Optional[float] = None
    ratio: Optional[float] = None
    total: float
    w_clip: float = 1.0
    w_sparse: Optional[float] = None
    w_ratio: Optional[float] = None


class GradCheckReport(BaseModel):
    """Analytic vs central-difference gradient comparison."""
    max_rel_error: float
    errors: Dict[str, float]
    functional: float


class SimplificationSchedule(BaseModel):
    r1: float = Field(gt=0)
    step: float = Field(gt=0)
    num_levels: int = Field(8, ge=1)
    factors: List[float]

    class Config:
        frozen = True


class LineageRecord(BaseModel):
    """Manifest entry for one (region, layer) training trajectory."""
    region: Region
    layer: int
    seed: int
    schedule: Optional[SimplificationSchedule] = None
    initial_clip_loss: Optional[float] = None
    final_clip_loss: Optional[float] = None
    status: str = "pending"
    error: Optional[str] = None


class RunManifest(BaseModel):
    version: int = 1
    package_version: str
    config: RunConfig
    master_seed: int
    backends: Dict[str, str]
    single_object: bool = False
    fg_transform: Optional[Dict[str, float]] = None
    lineages: List[LineageRecord] = Field(default_factory=list)
    presented_rows: List[int] = Field(default_factory=list)
    presented_layers: List[int] = Field(default_factory=list)
    missing_cells: List[str] = Field(default_factory=list)


class MetricRow(BaseModel):
    image: str
    region: Region = Region.combined
    layer: int
    level: int
    ms_ssim: float = Field(ge=0, le=1)
    recognizable: Optional[float] = Field(None, ge=0, le=1)
    stroke_count: float = Field(ge=0)


class MetricReport(BaseModel):
    """Per-cell metric grids; keys are "L{layer}_S{level}"."""
    ms_ssim_matrix: Dict[str, float] = Field(default_factory=dict)
    recognizability_matrix: Dict[str, float] = Field(default_factory=dict)
    stroke_count_matrix: Dict[str, float] = Field(default_factory=dict)
    rows: List[MetricRow] = Field(default_factory=list)
    missing_cells: List[str] = Field(default_factory=list)
    partial: bool = False
