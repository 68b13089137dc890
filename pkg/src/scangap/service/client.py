"""Thin HTTP client used by the CLI's ``--server`` mode."""

from __future__ import annotations

from typing import Any

import httpx

from .. import errors
from ..pointcloud import PointCloud
from .schemas import CloudModel

_ERRORS = {
    name: getattr(errors, name)
    for name in ("FormatError", "ValidationError", "PreconditionError", "EmptyCloudError",
                 "DegenerateCloudError", "ScanGapError")
}


class ServiceClient:
    def __init__(self, base_url: str, timeout: float = 600.0):
        self.base_url = base_url.rstrip("/")
        self.timeout = timeout

    def _post(self, path: str, body: dict) -> dict:
        try:
            resp = httpx.post(self.base_url + path, json=body, timeout=self.timeout)
        except httpx.HTTPError as exc:
            raise ConnectionError(f"cannot reach service at {self.base_url}: {exc}") from exc
        if resp.status_code >= 400:
            try:
                doc = resp.json()
            except ValueError:
                doc = {}
            name, detail = doc.get("error"), doc.get("detail", resp.text)
            if name == "RegistrationDiverged":
                raise errors.ScanGapError(detail)
            raise _ERRORS.get(name, errors.ScanGapError)(str(detail))
        return resp.json()

    @staticmethod
    def _cloud(c: PointCloud) -> dict:
        return CloudModel.from_cloud(c).model_dump()

    def compare(self, a: PointCloud, b: PointCloud, spec: dict[str, Any]) -> dict:
        return self._post("/compare", {"a": self._cloud(a), "b": self._cloud(b), "spec": spec})

    def two_step(self, a: PointCloud, b: PointCloud, threshold: float) -> dict:
        return self._post("/two-step", {"a": self._cloud(a), "b": self._cloud(b), "threshold": threshold})

    def perturb(self, cloud: PointCloud, spec: dict[str, Any]) -> PointCloud:
        doc = self._post("/perturb", {"cloud": self._cloud(cloud), "spec": spec})
        out = CloudModel(**doc).to_cloud()
        return PointCloud(out.points, out.intensity, frame_id=cloud.frame_id, pose=cloud.pose)
