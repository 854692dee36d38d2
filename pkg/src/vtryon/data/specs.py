"""Parameter records and the in-memory sample type.

All geometry in the renderer derives from these two frozen specs, so a
(seed, specs) pair pins a sample exactly.  Arrays follow the package
conventions: channel-first float32, images in [-1, 1], masks in {0, 1}.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

PATTERN_KINDS = ("solid", "horizontal-stripes", "vertical-stripes", "checks", "spots")

CANVAS_H, CANVAS_W = 64, 48
TEMPLATE_H, TEMPLATE_W = 48, 36

# Agnostic regions are filled with the uint8 mid-gray 128, which is the
# closest storable value to the [-1, 1] midpoint.
AGNOSTIC_FILL_U8 = 128
AGNOSTIC_FILL = np.float32(AGNOSTIC_FILL_U8 / 255.0 * 2.0 - 1.0)

SEG_LABELS = ("background", "skin", "head", "lower")


def color_to_float(c) -> np.ndarray:
    return (np.asarray(c, dtype=np.float32) / 255.0) * 2.0 - 1.0


@dataclass(frozen=True)
class GarmentSpec:
    """Flat garment description: silhouette plus surface pattern.

    Silhouette parameters are fractions of the template canvas; the
    worn garment keeps the same pixel dimensions (template and person
    canvases share a scale), so warping is rigid per limb.
    """

    pattern: str
    palette: tuple
    period: int
    shoulder_frac: float
    torso_frac: float
    sleeve_frac: float

    def validate(self) -> None:
        if self.pattern not in PATTERN_KINDS:
            raise ValueError(f"unknown pattern kind {self.pattern!r}")
        if not 2 <= len(self.palette) <= 3:
            raise ValueError("palette must hold 2 or 3 colors")
        for c in self.palette:
            if len(c) != 3 or any(not 0 <= v <= 255 for v in c):
                raise ValueError(f"palette color {c} is not an 8-bit RGB triple")
        for i, a in enumerate(self.palette):
            for b in self.palette[i + 1:]:
                gaps = [abs(int(x) - int(y)) for x, y in zip(a, b)]
                if min(gaps) < 32:
                    raise ValueError(
                        f"palette colors {a} and {b} differ by {min(gaps)} < 32 in a channel")
        if self.period < 2:
            raise ValueError(f"pattern period {self.period} < 2 px")
        if not 0.30 <= self.shoulder_frac <= 0.50:
            raise ValueError(f"shoulder fraction {self.shoulder_frac} outside [0.30, 0.50]")
        if not 0.33 <= self.torso_frac <= 0.50:
            raise ValueError(f"torso fraction {self.torso_frac} outside [0.33, 0.50]")
        if not 0.30 <= self.sleeve_frac <= 0.80:
            raise ValueError(f"sleeve fraction {self.sleeve_frac} outside [0.30, 0.80]")


@dataclass(frozen=True)
class FigureSpec:
    """Pose and coloring of the target figure.

    The body itself is canonical; only the torso tilt, the two arm
    swing angles and the colors vary.  Arm angles are measured outward
    from the torso axis.
    """

    tilt_deg: float
    arm_left_deg: float
    arm_right_deg: float
    skin: tuple
    hair: tuple
    lower: tuple
    canvas: tuple = (CANVAS_H, CANVAS_W)

    def validate(self) -> None:
        if not -15.0 <= self.tilt_deg <= 15.0:
            raise ValueError(f"torso tilt {self.tilt_deg} outside [-15, 15] degrees")
        for name, a in (("left", self.arm_left_deg), ("right", self.arm_right_deg)):
            if not 0.0 <= a <= 40.0:
                raise ValueError(f"{name} arm angle {a} outside [0, 40] degrees")
        # Canvas-fit check happens in the renderer where the geometry
        # lives; it raises with the violated margin.
        from .render import check_figure_margin
        check_figure_margin(self)


@dataclass
class TryOnSample:
    """One paired try-on record.

    person        (3, H, W)   figure wearing the garment, the ground truth
    garment       (3, H', W') flat template
    garment_mask  (H', W')    template silhouette M_c
    agnostic      (3, H, W)   person with the masked region filled mid-gray
    inpaint_mask  (H, W)      region the refiner is allowed to repaint, m
    seg           (4, H, W)   one-hot background/skin/head/lower, clothes-agnostic
    pose          (5, H, W)   joint heatmaps: head, shoulders, wrists
    clothes_mask  (H, W)      garment region on the person, S_c
    """

    sample_id: str
    person: np.ndarray
    garment: np.ndarray
    garment_mask: np.ndarray
    agnostic: np.ndarray
    inpaint_mask: np.ndarray
    seg: np.ndarray
    pose: np.ndarray
    clothes_mask: np.ndarray
    garment_spec: GarmentSpec = field(repr=False, default=None)
    figure_spec: FigureSpec = field(repr=False, default=None)

    def audit(self) -> list:
        """Return human-readable descriptions of violated invariants."""
        bad = []
        m = self.inpaint_mask
        outside = m == 0.0
        if not np.array_equal(self.agnostic[:, outside], self.person[:, outside]):
            bad.append("agnostic differs from person outside the inpaint mask")
        inside = m == 1.0
        if inside.any() and not np.all(self.agnostic[:, inside] == AGNOSTIC_FILL):
            bad.append("agnostic region is not a constant mid-gray fill")
        if np.any((self.clothes_mask == 1.0) & (m == 0.0)):
            bad.append("clothes mask escapes the inpaint mask")
        if not np.array_equal(self.seg.sum(axis=0), np.ones_like(m)):
            bad.append("segmentation is not one-hot")
        for name, arr in (("inpaint_mask", m), ("clothes_mask", self.clothes_mask),
                          ("garment_mask", self.garment_mask)):
            if not np.isin(arr, (0.0, 1.0)).all():
                bad.append(f"{name} is not binary")
        for name, arr in (("person", self.person), ("garment", self.garment),
                          ("agnostic", self.agnostic)):
            if arr.min() < -1.0 or arr.max() > 1.0:
                bad.append(f"{name} leaves [-1, 1]")
        return bad
