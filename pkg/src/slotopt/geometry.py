"""Trapezoidal slot geometry, keystone bar packing and the slot fill factor.

Coordinates are in millimetres with the origin at the centre of the bottom
base ``b2``; ``y`` grows towards the top base ``b1`` at ``y = hc``.  Only the
conductive region (height ``hc``) is modelled.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np

ALLOWED_LAYERS = (2, 4, 6, 8, 10)
# x7/x8 are given as percentages of the available band dimensions
FRACTION_SCALE = 0.01

LAYOUT_CSV_COLUMNS = ("layer", "widthTop", "widthBottom", "height", "x", "y", "strandCount")


class InfeasibleGeometry(ValueError):
    """Clearance or fillet leave no room for a bar."""


class LayoutViolation(ValueError):
    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))


@dataclass(frozen=True)
class SlotGeometry:
    b1: float
    b2: float
    h1: float
    hc: float
    angle: float = 85.9
    fillet: float = 0.0
    opening: float = 10.0

    def __post_init__(self):
        if not self.b2 > 0 or self.b1 < self.b2:
            raise InfeasibleGeometry(f"need b1 >= b2 > 0, got b1={self.b1}, b2={self.b2}")
        if not 0 < self.hc <= self.h1:
            raise InfeasibleGeometry(f"need 0 < hc <= h1, got hc={self.hc}, h1={self.h1}")
        if self.fillet < 0:
            raise InfeasibleGeometry("fillet must be non-negative")

    @classmethod
    def from_design(cls, x) -> SlotGeometry:
        x = np.asarray(x, dtype=float)
        return cls(b1=x[0], b2=x[1], h1=x[2], hc=x[3], angle=x[4], fillet=x[8], opening=x[9])

    def scaled(self, c: float) -> SlotGeometry:
        return SlotGeometry(
            self.b1 * c, self.b2 * c, self.h1 * c, self.hc * c, self.angle, self.fillet * c, self.opening * c
        )

    def width_at(self, y):
        """Slot width at height ``y`` inside the conductive region."""
        return self.b2 + (self.b1 - self.b2) * np.asarray(y, dtype=float) / self.hc

    def polygon(self) -> np.ndarray:
        return np.array(
            [
                [-self.b2 / 2, 0.0],
                [self.b2 / 2, 0.0],
                [self.b1 / 2, self.hc],
                [-self.b1 / 2, self.hc],
            ]
        )

    # fillet -------------------------------------------------------------
    def _wall(self):
        """Unit direction of the right wall (upwards) and its outward normal."""
        dx = (self.b1 - self.b2) / 2
        length = math.hypot(dx, self.hc)
        direction = np.array([dx, self.hc]) / length
        normal = np.array([self.hc, -dx]) / length
        return direction, normal

    @property
    def corner_angle(self) -> float:
        """Interior angle at the bottom corners (radians)."""
        dx = (self.b1 - self.b2) / 2
        return math.pi / 2 + math.atan2(dx, self.hc)

    @property
    def effective_fillet(self) -> float:
        # two fillets may at most meet at the middle of the bottom base
        r_max = (self.b2 / 2) * math.tan(self.corner_angle / 2)
        return min(self.fillet, r_max)

    def fillet_center(self) -> np.ndarray:
        """Centre of the right-hand fillet arc (mirror for the left one)."""
        r = self.effective_fillet
        d = r / math.tan(self.corner_angle / 2)
        return np.array([self.b2 / 2 - d, r])

    @property
    def fillet_tangent_height(self) -> float:
        """Height of the point where the fillet arc meets the wall."""
        r = self.effective_fillet
        if r == 0:
            return 0.0
        direction, _ = self._wall()
        d = r / math.tan(self.corner_angle / 2)
        return d * direction[1]

    def contains(self, points, tol: float = 1e-9) -> np.ndarray:
        """Which points lie in the filleted conductive region."""
        p = np.atleast_2d(np.asarray(points, dtype=float))
        x, y = p[:, 0], p[:, 1]
        inside = (y >= -tol) & (y <= self.hc + tol) & (np.abs(x) <= self.width_at(y) / 2 + tol)
        r = self.effective_fillet
        if r > 0:
            c = self.fillet_center()
            _, normal = self._wall()
            v = np.column_stack([np.abs(x) - c[0], y - c[1]])
            # wedge spanned by the downward radius and the wall-normal radius
            in_wedge = (v[:, 1] < 0) & (v[:, 0] * normal[1] - v[:, 1] * normal[0] >= 0)
            in_wedge &= v[:, 0] > 0
            outside_arc = np.hypot(v[:, 0], v[:, 1]) > r + tol
            inside &= ~(in_wedge & outside_arc)
        return inside


@dataclass(frozen=True)
class ConductorBar:
    layer: int
    width_top: float
    width_bottom: float
    height: float
    length: float
    strand_count: int
    position: tuple  # (x, y) of the bar's mid-height centre, mm

    @property
    def area(self) -> float:
        return (self.width_top + self.width_bottom) * self.height / 2

    def polygon(self) -> np.ndarray:
        x, y = self.position
        h = self.height / 2
        return np.array(
            [
                [x - self.width_bottom / 2, y - h],
                [x + self.width_bottom / 2, y - h],
                [x + self.width_top / 2, y + h],
                [x - self.width_top / 2, y + h],
            ]
        )


@dataclass(frozen=True)
class ConductorLayout:
    bars: tuple = field(default_factory=tuple)
    layers: int = 2
    clearance: float = 0.0

    @property
    def copper_area(self) -> float:
        return float(sum(b.area for b in self.bars))

    @property
    def strand_count(self) -> int:
        return int(sum(b.strand_count for b in self.bars))


def conductive_area(slot: SlotGeometry) -> float:
    return (slot.b1 + slot.b2) * slot.hc / 2


def _polygon_area(poly: np.ndarray) -> float:
    x, y = poly[:, 0], poly[:, 1]
    return 0.5 * abs(float(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1))))


def _clip_convex(subject: np.ndarray, clipper: np.ndarray) -> np.ndarray:
    """Sutherland-Hodgman clip of one convex CCW polygon by another."""
    out = list(map(tuple, subject))
    n = len(clipper)
    for i in range(n):
        a, b = clipper[i], clipper[(i + 1) % n]
        inp, out = out, []
        if not inp:
            break

        def side(p):
            return (b[0] - a[0]) * (p[1] - a[1]) - (b[1] - a[1]) * (p[0] - a[0])

        for j in range(len(inp)):
            p, q = np.array(inp[j - 1]), np.array(inp[j])
            sp, sq = side(p), side(q)
            if sq >= 0:
                if sp < 0:
                    out.append(tuple(p + (q - p) * sp / (sp - sq)))
                out.append(tuple(q))
            elif sp >= 0:
                out.append(tuple(p + (q - p) * sp / (sp - sq)))
    return np.array(out) if out else np.zeros((0, 2))


def _overlap_area(p: np.ndarray, q: np.ndarray) -> float:
    clipped = _clip_convex(p, q)
    return _polygon_area(clipped) if len(clipped) >= 3 else 0.0


def validate_layout(layout: ConductorLayout, slot: SlotGeometry, tol: float = 1e-9) -> list:
    """Return the list of broken layout invariants (empty when valid)."""
    violations = []
    if layout.layers not in ALLOWED_LAYERS:
        violations.append(f"layer_count({layout.layers})")
    for i, bar in enumerate(layout.bars):
        if min(bar.width_top, bar.width_bottom, bar.height, bar.length) <= 0 or bar.strand_count < 1:
            violations.append(f"degenerate(bar{i})")
            continue
        if not np.all(slot.contains(bar.polygon(), tol=tol)):
            violations.append(f"out_of_bounds(bar{i})")
    scale = max(slot.b1, slot.hc) ** 2
    for i in range(len(layout.bars)):
        for j in range(i + 1, len(layout.bars)):
            if _overlap_area(layout.bars[i].polygon(), layout.bars[j].polygon()) > tol * scale:
                violations.append(f"overlap(bar{i},bar{j})")
    if layout.bars:
        present = {b.layer for b in layout.bars}
        missing = [k for k in range(1, layout.layers + 1) if k not in present]
        if missing:
            violations.append(f"empty_layer({','.join(map(str, missing))})")
    return violations


def slot_fill_factor(layout: ConductorLayout, slot: SlotGeometry) -> float:
    """Copper cross-section over the conductive area of the slot."""
    if not layout.bars:
        return 0.0
    violations = validate_layout(layout, slot)
    if violations:
        raise LayoutViolation(violations)
    return layout.copper_area / conductive_area(slot)


def _band_limits(slot: SlotGeometry, layers: int, k: int, clearance: float):
    band = slot.hc / layers
    y0, y1 = k * band, (k + 1) * band
    if k == 0:
        # stay above the line through the fillet tangent points
        y0 = max(y0, slot.fillet_tangent_height)
    lo, hi = y0 + clearance, y1 - clearance
    if hi <= lo:
        raise InfeasibleGeometry(
            f"clearance {clearance:g} mm leaves no height in band {k + 1} of {layers}"
        )
    return lo, hi


def pack_keystone(
    slot: SlotGeometry,
    layers: int,
    clearance: float,
    strand_diameter: float,
    height_fraction: float = 1.0,
    width_fraction: float = 1.0,
    bar_length: float = 125.0,
) -> ConductorLayout:
    """One keystone bar per equal-height band, walls parallel to the slot's."""
    if layers not in ALLOWED_LAYERS:
        raise ValueError(f"layers must be one of {ALLOWED_LAYERS}, got {layers}")
    if clearance < 0 or strand_diameter <= 0:
        raise ValueError("need clearance >= 0 and strand_diameter > 0")
    if not (0 < height_fraction <= 1 and 0 < width_fraction <= 1):
        raise ValueError("bar fractions must lie in (0, 1]")
    cell = strand_diameter**2
    bars = []
    for k in range(layers):
        lo, hi = _band_limits(slot, layers, k, clearance)
        h = height_fraction * (hi - lo)
        mid = (lo + hi) / 2
        yb, yt = mid - h / 2, mid + h / 2
        wb = float(slot.width_at(yb)) - 2 * clearance
        wt = float(slot.width_at(yt)) - 2 * clearance
        if min(wb, wt) <= 0:
            raise InfeasibleGeometry(
                f"clearance {clearance:g} mm consumes the slot width in band {k + 1}"
            )
        wb, wt = width_fraction * wb, width_fraction * wt
        area = (wb + wt) * h / 2
        bars.append(
            ConductorBar(
                layer=k + 1,
                width_top=wt,
                width_bottom=wb,
                height=h,
                length=bar_length,
                strand_count=max(int(math.floor(area / cell)), 1),
                position=(0.0, mid),
            )
        )
    return ConductorLayout(bars=tuple(bars), layers=layers, clearance=clearance)


def pack_rectangular(
    slot: SlotGeometry,
    layers: int = 2,
    columns: int = 2,
    clearance: float = 0.0,
    strand_diameter: float = 0.8,
    bar_length: float = 125.0,
) -> ConductorLayout:
    """Identical rectangular bars, ``columns`` side by side in each band.

    All bars share the size that fits the narrowest band, which is the
    conventional four-bar Litz arrangement when ``layers = columns = 2``.
    """
    if layers not in ALLOWED_LAYERS:
        raise ValueError(f"layers must be one of {ALLOWED_LAYERS}, got {layers}")
    limits = [_band_limits(slot, layers, k, clearance) for k in range(layers)]
    height = min(hi - lo for lo, hi in limits)
    narrowest = min(float(slot.width_at(lo)) for lo, _ in limits)
    pitch = narrowest / columns
    width = pitch - 2 * clearance
    if width <= 0:
        raise InfeasibleGeometry(f"clearance {clearance:g} mm consumes the slot width")
    strands = max(int(math.floor(width * height / strand_diameter**2)), 1)
    bars = []
    for k, (lo, hi) in enumerate(limits):
        mid = (lo + hi) / 2
        for c in range(columns):
            x = -narrowest / 2 + (c + 0.5) * pitch
            bars.append(ConductorBar(k + 1, width, width, height, bar_length, strands, (x, mid)))
    return ConductorLayout(bars=tuple(bars), layers=layers, clearance=clearance)


def layout_from_design(x, layers: int, clearance: float, strand_diameter: float) -> ConductorLayout:
    x = np.asarray(x, dtype=float)
    return pack_keystone(
        SlotGeometry.from_design(x),
        layers,
        clearance,
        strand_diameter,
        height_fraction=min(x[6] * FRACTION_SCALE, 1.0),
        width_fraction=min(x[7] * FRACTION_SCALE, 1.0),
        bar_length=x[5],
    )


# export ---------------------------------------------------------------------


def layout_to_csv(layout: ConductorLayout) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(LAYOUT_CSV_COLUMNS)
    for b in layout.bars:
        writer.writerow(
            [
                b.layer,
                repr(float(b.width_top)),
                repr(float(b.width_bottom)),
                repr(float(b.height)),
                repr(float(b.position[0])),
                repr(float(b.position[1])),
                b.strand_count,
            ]
        )
    return buf.getvalue()


def layout_from_csv(text: str, layers: int, clearance: float = 0.0, bar_length: float = 125.0) -> ConductorLayout:
    rows = list(csv.DictReader(io.StringIO(text)))
    if rows and tuple(rows[0].keys()) != LAYOUT_CSV_COLUMNS:
        raise ValueError(f"layout CSV columns must be {LAYOUT_CSV_COLUMNS}")
    bars = tuple(
        ConductorBar(
            layer=int(r["layer"]),
            width_top=float(r["widthTop"]),
            width_bottom=float(r["widthBottom"]),
            height=float(r["height"]),
            length=bar_length,
            strand_count=int(r["strandCount"]),
            position=(float(r["x"]), float(r["y"])),
        )
        for r in rows
    )
    return ConductorLayout(bars=bars, layers=layers, clearance=clearance)


def _path(poly: np.ndarray) -> str:
    # SVG y axis points down; flip so the slot bottom is drawn at the bottom
    pts = [f"{p[0]:.4f},{-p[1]:.4f}" for p in poly]
    return "M " + " L ".join(pts) + " Z"


def svg_paths(layout: ConductorLayout, slot: SlotGeometry) -> list:
    """SVG path strings: the slot outline first, then one per bar."""
    return [_path(slot.polygon())] + [_path(b.polygon()) for b in layout.bars]


def layout_to_svg(layout: ConductorLayout, slot: SlotGeometry) -> str:
    pad = 1.0
    w, h = slot.b1 + 2 * pad, slot.hc + 2 * pad
    paths = svg_paths(layout, slot)
    lines = [
        f'<svg xmlns="http://www.w3.org/2000/svg" viewBox="{-w / 2:.4f} {-(slot.hc + pad):.4f} {w:.4f} {h:.4f}">',
        f'  <path d="{paths[0]}" fill="none" stroke="black" stroke-width="0.05"/>',
    ]
    lines += [f'  <path d="{p}" fill="#b87333" stroke="none"/>' for p in paths[1:]]
    lines.append("</svg>")
    return "\n".join(lines) + "\n"
