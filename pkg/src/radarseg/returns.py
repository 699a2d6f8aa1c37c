"""Radar return records and the columnar table used throughout the pipeline."""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import IntEnum
from typing import Iterator, Optional

import numpy as np

from .geometry import LocalPosition, PolarReturn, spherical_to_xyz

UNLABELED = 0


class ClassLabel(IntEnum):
    GROUND = 1
    M300 = 2
    AIRPLANE = 3
    MINI = 4
    INFRASTRUCTURE = 5


N_CLASSES = len(ClassLabel)
CLASS_CODES = np.array([c.value for c in ClassLabel], dtype=np.int64)
CLASS_NAMES = {c.value: c.name.lower() for c in ClassLabel}


@dataclass(frozen=True)
class RadarReturn:
    t: float
    polar: PolarReturn
    doppler: float
    rcs: float
    label: Optional[ClassLabel] = None

    @property
    def cartesian(self) -> LocalPosition:
        x, y, z = spherical_to_xyz(self.polar.range, self.polar.azimuth, self.polar.elevation)
        return LocalPosition(float(x), float(y), float(z))


_FLOAT_COLUMNS = ("t", "r", "az", "el", "x", "y", "z", "doppler", "rcs")


@dataclass
class Returns:
    """Column-oriented batch of returns.

    ``x, y, z`` are sensor-frame cartesian and always derived from
    ``r, az, el``. ``label`` uses 0 for "not yet labeled".
    """

    t: np.ndarray
    r: np.ndarray
    az: np.ndarray
    el: np.ndarray
    doppler: np.ndarray
    rcs: np.ndarray
    label: np.ndarray = field(default=None)
    x: np.ndarray = field(default=None, init=False)
    y: np.ndarray = field(default=None, init=False)
    z: np.ndarray = field(default=None, init=False)

    def __post_init__(self):
        n = len(self.t)
        for name in ("t", "r", "az", "el", "doppler", "rcs"):
            col = np.asarray(getattr(self, name), dtype=np.float64).reshape(-1)
            if len(col) != n:
                raise ValueError(f"column {name!r} has length {len(col)}, expected {n}")
            if not np.all(np.isfinite(col)):
                raise ValueError(f"column {name!r} contains non-finite values")
            setattr(self, name, col)
        if np.any(self.r < 0):
            raise ValueError("negative range")
        if self.label is None:
            self.label = np.zeros(n, dtype=np.uint8)
        self.label = np.asarray(self.label, dtype=np.uint8).reshape(-1)
        if len(self.label) != n:
            raise ValueError("label column length mismatch")
        xyz = spherical_to_xyz(self.r, self.az, self.el).reshape(n, 3)
        self.x, self.y, self.z = xyz[:, 0], xyz[:, 1], xyz[:, 2]

    @classmethod
    def empty(cls) -> "Returns":
        z = np.zeros(0)
        return cls(z, z, z, z, z, z)

    @classmethod
    def concat(cls, parts) -> "Returns":
        parts = [p for p in parts if len(p)]
        if not parts:
            return cls.empty()
        cols = {n: np.concatenate([getattr(p, n) for p in parts])
                for n in ("t", "r", "az", "el", "doppler", "rcs", "label")}
        return cls(**cols)

    @classmethod
    def from_records(cls, records) -> "Returns":
        records = list(records)
        if not records:
            return cls.empty()
        return cls(
            t=[p.t for p in records],
            r=[p.polar.range for p in records],
            az=[p.polar.azimuth for p in records],
            el=[p.polar.elevation for p in records],
            doppler=[p.doppler for p in records],
            rcs=[p.rcs for p in records],
            label=[UNLABELED if p.label is None else int(p.label) for p in records],
        )

    def __len__(self) -> int:
        return len(self.t)

    def __getitem__(self, idx) -> "Returns":
        return Returns(self.t[idx], self.r[idx], self.az[idx], self.el[idx],
                       self.doppler[idx], self.rcs[idx], self.label[idx])

    def sorted_by_time(self) -> "Returns":
        return self[np.argsort(self.t, kind="stable")]

    def features(self) -> np.ndarray:
        """(n, 5) feature matrix in the order x, y, z, rcs, doppler."""
        return np.stack([self.x, self.y, self.z, self.rcs, self.doppler], axis=1)

    def records(self) -> Iterator[RadarReturn]:
        for i in range(len(self)):
            lab = int(self.label[i])
            yield RadarReturn(
                float(self.t[i]),
                PolarReturn(float(self.r[i]), float(self.az[i]), float(self.el[i])),
                float(self.doppler[i]), float(self.rcs[i]),
                ClassLabel(lab) if lab else None,
            )

    def class_counts(self) -> dict:
        counts = np.bincount(self.label, minlength=N_CLASSES + 1)
        return {CLASS_NAMES[c]: int(counts[c]) for c in CLASS_NAMES}

    def equals(self, other: "Returns") -> bool:
        return len(self) == len(other) and all(
            np.array_equal(getattr(self, n), getattr(other, n)) for n in _FLOAT_COLUMNS + ("label",)
        )
