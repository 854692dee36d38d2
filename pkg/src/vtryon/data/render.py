"""Analytic rendering of figures and garments.

Every region is a closed-form shape (rotated rectangles, capsules,
discs) evaluated at pixel centers, so renders are deterministic and
edge-exact: a pixel either belongs to a region or it does not, with no
antialiasing.  The worn garment samples its pattern through the inverse
of a per-limb rigid map into template coordinates, which is what makes
the flat-to-worn correspondence an exact piecewise-affine deformation.

Body geometry is canonical and expressed in units of canvas_height/64,
so the default 64x48 canvas uses the constants below verbatim.
"""

from __future__ import annotations

import math

import numpy as np

from .specs import (AGNOSTIC_FILL, CANVAS_H, CANVAS_W, TEMPLATE_H, TEMPLATE_W,
                    FigureSpec, GarmentSpec, color_to_float)

# Canonical body, in pixels at H=64.  The pivot is the torso center.
PIVOT_Y = 26.0
TORSO_HALF_W = 7.5
TORSO_HALF_L = 11.0
HEAD_R = 5.0
HEAD_OFFSET = 17.0          # pivot to head center, along the torso axis
SHOULDER_DX = 7.5
SHOULDER_DY = -10.5         # relative to pivot, along torso axes
ARM_LEN = 14.0
ARM_R = 2.2
LEG_HALF_W = 6.8
LEG_BOTTOM = 58.0
HIP_OFFSET = 11.0
COLLAR_OFFSET = -11.0       # pivot to collar center

# Flat template layout, in pixels at H'=48.
TPL_TOP = 6.0
TPL_SHOULDER_DROP = 1.5
TPL_SLEEVE_DEG = 60.0       # sleeve axis below horizontal on the flat lay
NECK_R = 3.0
SLEEVE_R = 2.3

# Repaint region: generous figure-derived envelope that contains every
# admissible garment.  Depends only on FigureSpec, never on the garment.
MASK_BOX_CENTER_OFF = 12.5  # below the collar, along the torso axis
MASK_BOX_HALF_W = 10.0
MASK_BOX_HALF_L = 13.5
MASK_ARM_R = 3.3
MASK_ARM_BACK = 1.0         # capsule start behind the shoulder

POSE_SIGMA = 1.5
BG_COLOR = (233, 233, 238)
TPL_BG_COLOR = (245, 244, 246)

MARGIN_PX = 2.0


def _rot(dx, dy, deg):
    """Rotate offsets by deg in the y-down pixel frame (positive tilts
    the top of the figure toward +x)."""
    r = math.radians(deg)
    c, s = math.cos(r), math.sin(r)
    return dx * c - dy * s, dx * s + dy * c


def _grid(h, w):
    y, x = np.mgrid[0:h, 0:w]
    return x.astype(np.float64), y.astype(np.float64)


def _rect(x, y, cx, cy, deg, half_w, half_l):
    """Rectangle centered at (cx, cy), long axis along the rotated
    vertical (deg=0 means axis straight down)."""
    r = math.radians(deg)
    c, s = math.cos(r), math.sin(r)
    dx, dy = x - cx, y - cy
    across = dx * c + dy * s
    along = -dx * s + dy * c
    return (np.abs(across) <= half_w) & (np.abs(along) <= half_l)


def _capsule(x, y, p0, p1, r):
    vx, vy = p1[0] - p0[0], p1[1] - p0[1]
    l2 = vx * vx + vy * vy
    dx, dy = x - p0[0], y - p0[1]
    t = np.clip((dx * vx + dy * vy) / l2, 0.0, 1.0) if l2 > 0 else 0.0
    qx, qy = dx - t * vx, dy - t * vy
    return qx * qx + qy * qy <= r * r


def _disc(x, y, c, r):
    return (x - c[0]) ** 2 + (y - c[1]) ** 2 <= r * r


class _BodyFrame:
    """All joint and anchor positions implied by a FigureSpec."""

    def __init__(self, fig: FigureSpec):
        h, w = fig.canvas
        self.scale = h / 64.0
        self.h, self.w = h, w
        s = self.scale
        self.pivot = (w / 2.0, PIVOT_Y * s)
        t = fig.tilt_deg

        def at(dx, dy):
            rx, ry = _rot(dx * s, dy * s, t)
            return (self.pivot[0] + rx, self.pivot[1] + ry)

        self.tilt = t
        self.head = at(0.0, -HEAD_OFFSET)
        self.collar = at(0.0, COLLAR_OFFSET)
        self.shoulder_l = at(-SHOULDER_DX, SHOULDER_DY)
        self.shoulder_r = at(+SHOULDER_DX, SHOULDER_DY)
        self.hip = at(0.0, HIP_OFFSET)
        ang_l = math.radians(t - fig.arm_left_deg)
        ang_r = math.radians(t + fig.arm_right_deg)
        self.dir_l = (math.sin(ang_l), math.cos(ang_l))
        self.dir_r = (math.sin(ang_r), math.cos(ang_r))
        self.arm_deg_l = t - fig.arm_left_deg
        self.arm_deg_r = t + fig.arm_right_deg
        self.wrist_l = (self.shoulder_l[0] + ARM_LEN * s * self.dir_l[0],
                        self.shoulder_l[1] + ARM_LEN * s * self.dir_l[1])
        self.wrist_r = (self.shoulder_r[0] + ARM_LEN * s * self.dir_r[0],
                        self.shoulder_r[1] + ARM_LEN * s * self.dir_r[1])


def check_figure_margin(fig: FigureSpec) -> None:
    """Raise ValueError naming the violated margin if the figure (with
    its repaint envelope, which bounds every admissible garment) comes
    closer than 2 px to a canvas edge."""
    f = _BodyFrame(fig)
    s = f.scale
    pts = []

    def circle(c, r):
        pts.extend([(c[0] - r, c[1] - r), (c[0] + r, c[1] + r)])

    circle(f.head, HEAD_R * s)
    circle(f.wrist_l, MASK_ARM_R * s)
    circle(f.wrist_r, MASK_ARM_R * s)
    circle(f.shoulder_l, MASK_ARM_R * s)
    circle(f.shoulder_r, MASK_ARM_R * s)
    bc = _rot(0.0, (COLLAR_OFFSET + MASK_BOX_CENTER_OFF) * s, f.tilt)
    box_c = (f.pivot[0] + bc[0], f.pivot[1] + bc[1])
    for sx in (-1, 1):
        for sy in (-1, 1):
            dx, dy = _rot(sx * MASK_BOX_HALF_W * s, sy * MASK_BOX_HALF_L * s, f.tilt)
            pts.append((box_c[0] + dx, box_c[1] + dy))
    pts.extend([(f.hip[0] - LEG_HALF_W * s, f.hip[1] - 1.0 * s),
                (f.hip[0] + LEG_HALF_W * s, LEG_BOTTOM * s)])

    xs = [p[0] for p in pts]
    ys = [p[1] for p in pts]
    margins = {"left": min(xs), "top": min(ys),
               "right": (f.w - 1) - max(xs), "bottom": (f.h - 1) - max(ys)}
    side = min(margins, key=margins.get)
    if margins[side] < MARGIN_PX:
        raise ValueError(
            f"figure violates the canvas margin: {margins[side]:.2f} px on the "
            f"{side} side, need >= {MARGIN_PX:g}")


# -- patterns -----------------------------------------------------------------

def pattern_colors(g: GarmentSpec, u: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Color of the flat garment at continuous template coordinates.

    Defined on the whole plane so inverse-mapped worn pixels near seams
    always receive a color.  Returns (3, ...) float32 in [-1, 1].
    """
    pal = np.stack([color_to_float(c) for c in g.palette])
    k = len(pal)
    p = float(g.period)
    if g.pattern == "solid":
        idx = np.zeros(u.shape, dtype=np.int64)
    elif g.pattern == "horizontal-stripes":
        idx = np.floor(v / p).astype(np.int64) % k
    elif g.pattern == "vertical-stripes":
        idx = np.floor(u / p).astype(np.int64) % k
    elif g.pattern == "checks":
        idx = (np.floor(u / p).astype(np.int64) + np.floor(v / p).astype(np.int64)) % k
    elif g.pattern == "spots":
        cu = np.floor(u / p)
        cv = np.floor(v / p)
        du = u - (cu + 0.5) * p
        dv = v - (cv + 0.5) * p
        inside = du * du + dv * dv <= (0.32 * p) ** 2
        alt = (cu.astype(np.int64) + cv.astype(np.int64)) % (k - 1)
        idx = np.where(inside, 1 + alt, 0)
    else:
        raise ValueError(f"unknown pattern {g.pattern!r}")
    return np.moveaxis(pal[idx], -1, 0)


# -- template -----------------------------------------------------------------

def _template_layout(g: GarmentSpec, h, w, scale):
    htw = g.shoulder_frac * w / 2.0
    torso_len = g.torso_frac * h
    sleeve_len = g.sleeve_frac * ARM_LEN * scale
    cx = w / 2.0
    top = TPL_TOP * scale
    d = math.radians(TPL_SLEEVE_DEG)
    anchors = {
        "cx": cx, "top": top, "htw": htw, "torso_len": torso_len,
        "sleeve_len": sleeve_len,
        "shoulder_l": (cx - htw, top + TPL_SHOULDER_DROP * scale),
        "shoulder_r": (cx + htw, top + TPL_SHOULDER_DROP * scale),
        "dir_l": (-math.cos(d), math.sin(d)),
        "dir_r": (+math.cos(d), math.sin(d)),
    }
    return anchors


def render_template(g: GarmentSpec, size=(TEMPLATE_H, TEMPLATE_W)):
    """Flat garment image I_c and its silhouette mask M_c."""
    h, w = size
    scale = h / float(TEMPLATE_H)
    lay = _template_layout(g, h, w, scale)
    x, y = _grid(h, w)
    panel = (np.abs(x - lay["cx"]) <= lay["htw"]) \
        & (y >= lay["top"]) & (y <= lay["top"] + lay["torso_len"]) \
        & ~_disc(x, y, (lay["cx"], lay["top"]), NECK_R * scale)
    sleeves = np.zeros_like(panel)
    for side in ("l", "r"):
        p0 = lay[f"shoulder_{side}"]
        d = lay[f"dir_{side}"]
        p1 = (p0[0] + lay["sleeve_len"] * d[0], p0[1] + lay["sleeve_len"] * d[1])
        sleeves |= _capsule(x, y, p0, p1, SLEEVE_R * scale)
    mask = panel | sleeves
    img = np.broadcast_to(color_to_float(TPL_BG_COLOR)[:, None, None], (3, h, w)).copy()
    colors = pattern_colors(g, x, y).astype(np.float32)
    img = np.where(mask[None], colors, img)
    return img.astype(np.float32), mask.astype(np.float32)


# -- person -------------------------------------------------------------------

def _inverse_rigid(px, py, origin_p, origin_t, deg):
    """Map person coords to template coords for one garment piece: the
    forward map is a rotation by deg about origin_t followed by a
    translation onto origin_p."""
    dx, dy = px - origin_p[0], py - origin_p[1]
    r = math.radians(deg)
    c, s = math.cos(r), math.sin(r)
    u = dx * c + dy * s + origin_t[0]
    v = -dx * s + dy * c + origin_t[1]
    return u, v


def render_person(fig: FigureSpec, g: GarmentSpec) -> dict:
    """Render the dressed figure and all conditioning maps.

    Returns float32 arrays: person, agnostic (3,H,W); inpaint_mask,
    clothes_mask (H,W); seg (4,H,W) one-hot; pose (5,H,W).  Only the
    person and clothes_mask depend on the garment.
    """
    f = _BodyFrame(fig)
    s = f.scale
    h, w = f.h, f.w
    x, y = _grid(h, w)

    # Body parts.
    legs = (np.abs(x - f.hip[0]) <= LEG_HALF_W * s) \
        & (y >= f.hip[1] - 1.0 * s) & (y <= LEG_BOTTOM * s)
    torso = _rect(x, y, f.pivot[0], f.pivot[1], f.tilt, TORSO_HALF_W * s, TORSO_HALF_L * s)
    arm_l = _capsule(x, y, f.shoulder_l, f.wrist_l, ARM_R * s)
    arm_r = _capsule(x, y, f.shoulder_r, f.wrist_r, ARM_R * s)
    head = _disc(x, y, f.head, HEAD_R * s)
    hx, hy = x - f.head[0], y - f.head[1]
    along_head = -hx * math.sin(math.radians(f.tilt)) + hy * math.cos(math.radians(f.tilt))
    hair = head & (along_head < -1.0 * s)

    # Worn garment: rigid copies of the template pieces.
    lay = _template_layout(g, TEMPLATE_H * s, TEMPLATE_W * s, s)
    collar_t = (lay["cx"], lay["top"])
    pcx, pcy = _rot(0.0, lay["torso_len"] / 2.0, f.tilt)
    panel = _rect(x, y, f.collar[0] + pcx, f.collar[1] + pcy, f.tilt,
                  lay["htw"], lay["torso_len"] / 2.0) \
        & ~_disc(x, y, f.collar, NECK_R * s)
    pu, pv = _inverse_rigid(x, y, f.collar, collar_t, f.tilt)
    panel_colors = pattern_colors(g, pu, pv).astype(np.float32)

    # Axis angles measured from vertical-down, positive toward +x.
    tpl_sleeve_deg = {"l": TPL_SLEEVE_DEG - 90.0, "r": 90.0 - TPL_SLEEVE_DEG}
    arm_deg = {"l": f.arm_deg_l, "r": f.arm_deg_r}
    shoulder_p = {"l": f.shoulder_l, "r": f.shoulder_r}
    dir_p = {"l": f.dir_l, "r": f.dir_r}
    sleeve_masks = {}
    sleeve_colors = {}
    for side in ("l", "r"):
        p0 = shoulder_p[side]
        d = dir_p[side]
        p1 = (p0[0] + lay["sleeve_len"] * d[0], p0[1] + lay["sleeve_len"] * d[1])
        sleeve_masks[side] = _capsule(x, y, p0, p1, SLEEVE_R * s)
        # The worn sleeve axis points arm_deg from vertical; the flat
        # one points TPL_SLEEVE_DEG below horizontal.  The rigid map is
        # the rotation between them, anchored shoulder to shoulder.
        rot_deg = arm_deg[side] - tpl_sleeve_deg[side]
        su, sv = _inverse_rigid(x, y, p0, lay[f"shoulder_{side}"], rot_deg)
        sleeve_colors[side] = pattern_colors(g, su, sv).astype(np.float32)

    clothes = panel | sleeve_masks["l"] | sleeve_masks["r"]

    # Compose back to front; the head goes over the collar line last.
    person = np.broadcast_to(color_to_float(BG_COLOR)[:, None, None], (3, h, w)).copy()
    skin = color_to_float(fig.skin)[:, None, None]
    person = np.where(legs[None], color_to_float(fig.lower)[:, None, None], person)
    person = np.where(torso[None], skin, person)
    person = np.where(arm_l[None] | arm_r[None], skin, person)
    person = np.where(panel[None], panel_colors, person)
    for side in ("l", "r"):
        person = np.where(sleeve_masks[side][None], sleeve_colors[side], person)
    person = np.where(head[None], skin, person)
    person = np.where(hair[None], color_to_float(fig.hair)[:, None, None], person)
    person = person.astype(np.float32)

    # Clothes-agnostic segmentation, one-hot with fixed priority.
    seg = np.zeros((4, h, w), dtype=np.float32)
    lab = np.zeros((h, w), dtype=np.int64)
    lab[legs] = 3
    lab[torso | arm_l | arm_r] = 1
    lab[head] = 2
    np.put_along_axis(seg, lab[None], 1.0, axis=0)

    # Repaint envelope: torso box plus arm capsules, figure-only.
    bc = _rot(0.0, (COLLAR_OFFSET + MASK_BOX_CENTER_OFF) * s, f.tilt)
    box = _rect(x, y, f.pivot[0] + bc[0], f.pivot[1] + bc[1], f.tilt,
                MASK_BOX_HALF_W * s, MASK_BOX_HALF_L * s)
    caps = np.zeros_like(box)
    for side in ("l", "r"):
        p0 = shoulder_p[side]
        d = dir_p[side]
        back = (p0[0] - MASK_ARM_BACK * s * d[0], p0[1] - MASK_ARM_BACK * s * d[1])
        wrist = f.wrist_l if side == "l" else f.wrist_r
        caps |= _capsule(x, y, back, wrist, MASK_ARM_R * s)
    inpaint = (box | caps).astype(np.float32)

    agnostic = person.copy()
    agnostic[:, inpaint == 1.0] = AGNOSTIC_FILL

    joints = [f.head, f.shoulder_l, f.shoulder_r, f.wrist_l, f.wrist_r]
    pose = np.stack([
        np.exp(-((x - jx) ** 2 + (y - jy) ** 2) / (2.0 * (POSE_SIGMA * s) ** 2))
        for jx, jy in joints]).astype(np.float32)

    return {
        "person": person,
        "agnostic": agnostic,
        "inpaint_mask": inpaint,
        "seg": seg,
        "pose": pose,
        "clothes_mask": clothes.astype(np.float32),
    }
