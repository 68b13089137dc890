"""Request and response models for the HTTP service."""

from __future__ import annotations

from typing import Any, Optional

import numpy as np
from pydantic import BaseModel, Field, field_validator

from ..pointcloud import PointCloud


class CloudModel(BaseModel):
    """A point cloud inline: ``points`` is a list of [x, y, z] rows."""

    points: list[list[float]]
    intensity: Optional[list[float]] = None
    frame_id: Optional[str] = None

    @field_validator("points")
    @classmethod
    def _rows_are_xyz(cls, v):
        if any(len(row) != 3 for row in v):
            raise ValueError("every point must have exactly 3 coordinates")
        return v

    def to_cloud(self) -> PointCloud:
        pts = np.asarray(self.points, dtype=np.float64).reshape(-1, 3)
        inten = None if self.intensity is None else np.asarray(self.intensity, dtype=np.float64)
        return PointCloud(pts, inten, frame_id=self.frame_id)

    @classmethod
    def from_cloud(cls, cloud: PointCloud) -> "CloudModel":
        return cls(
            points=cloud.points.tolist(),
            intensity=cloud.intensity.tolist() if cloud.has_intensity else None,
            frame_id=cloud.frame_id,
        )


class MetricModel(BaseModel):
    metric: str
    params: dict[str, Any] = Field(default_factory=dict)


class CompareRequest(BaseModel):
    a: CloudModel
    b: CloudModel
    spec: MetricModel


class MetricResultModel(BaseModel):
    metric: str
    params: dict[str, Any]
    value: float
    orientation: str
    wall_time_s: float
    details: Optional[dict[str, Any]] = None


class TwoStepRequest(BaseModel):
    a: CloudModel
    b: CloudModel
    threshold: float = 0.9


class TwoStepResponse(BaseModel):
    dcd_alpha1: float
    chamfer: Optional[float]
    verdict: str
    threshold: float


class PerturbRequest(BaseModel):
    cloud: CloudModel
    spec: dict[str, Any]


class TransferRequest(BaseModel):
    sim: CloudModel
    real: CloudModel
    radius: float = 1.0


class TransferResponse(BaseModel):
    cloud: CloudModel
    matched_fraction: float


class SelftestRequest(BaseModel):
    scans: list[CloudModel] = Field(min_length=1)
    metrics: Optional[list[MetricModel]] = None
    seed: int = 0


class SelftestResponse(BaseModel):
    conditions: list[str]
    metrics: list[str]
    matrix: dict[str, dict[str, str]]


class ErrorResponse(BaseModel):
    error: str
    detail: str
