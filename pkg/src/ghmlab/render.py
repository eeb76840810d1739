"""CSV, SVG, and PNG writers for geometric and density artifacts.

SVG overlays use a unit-square viewport scaled to a fixed pixel size with the
y axis flipped to screen orientation.  Dense heat maps go through a small
built-in color map and Pillow; sparse geometry (polylines, strips, coverage
pieces, cell sets) is written as plain SVG elements.
"""

import base64
import csv
import io

import numpy as np
from PIL import Image

DEFAULT_SIZE = 1024

_CMAP_ANCHORS = np.array(
    [
        [0.0, 13, 8, 65],
        [0.25, 84, 2, 163],
        [0.5, 190, 54, 90],
        [0.75, 251, 135, 97],
        [1.0, 252, 253, 191],
    ]
)


def _colormap(values):
    v = np.clip(values, 0.0, 1.0)
    out = np.empty(v.shape + (3,), dtype=np.uint8)
    xp = _CMAP_ANCHORS[:, 0]
    for ch in range(3):
        out[..., ch] = np.interp(v, xp, _CMAP_ANCHORS[:, ch + 1]).astype(np.uint8)
    return out


def write_csv(path, rows, header=None):
    with open(path, "w", newline="", encoding="utf8") as fh:
        w = csv.writer(fh)
        if header:
            w.writerow(header)
        w.writerows(rows)


def density_csv(path, density):
    """Row-major cell values: row i holds values[i, 0..m-1] (x index i)."""
    np.savetxt(path, density.values, delimiter=",", fmt="%.17g")


def polyline_csv(path, polyline):
    write_csv(path, [(f"{x:.17g}", f"{y:.17g}") for x, y in polyline], header=("x", "y"))


def cells_csv(path, mask):
    idx = np.argwhere(mask)
    write_csv(path, [(int(i), int(j)) for i, j in idx], header=("ix", "iy"))


def ulam_csv(path, ulam):
    coo = ulam.matrix.tocoo()
    rows = [(int(r), int(c), f"{v:.17g}") for r, c, v in zip(coo.row, coo.col, coo.data, strict=True)]
    write_csv(path, rows, header=("src", "dest", "fraction"))


def density_png(path, density, gamma=0.5):
    """Heat map PNG; values are max-normalized, gamma-compressed."""
    v = density.values
    top = v.max()
    norm = (v / top) ** gamma if top > 0 else v
    rgb = _colormap(norm)
    # values[ix, iy] -> image row = flipped y, column = x
    img = Image.fromarray(np.transpose(rgb, (1, 0, 2))[::-1], "RGB")
    img.save(path)


def _svg_xy(x, y, size):
    return x * size, (1.0 - y) * size


def _polyline_element(polyline, size, color, width=1.5):
    pts = " ".join(
        f"{px:.2f},{py:.2f}" for px, py in (_svg_xy(x, y, size) for x, y in polyline)
    )
    return f'<polyline points="{pts}" fill="none" stroke="{color}" stroke-width="{width}"/>'


def _strip_element(region, size, color, opacity=0.25):
    if region.empty:
        return ""
    if region.orientation == "vertical":
        fwd = [(lo, t) for lo, t in zip(region.lower, region.param, strict=True)]
        back = [(hi, t) for hi, t in zip(region.upper[::-1], region.param[::-1], strict=True)]
    else:
        fwd = [(t, lo) for t, lo in zip(region.param, region.lower, strict=True)]
        back = [(t, hi) for t, hi in zip(region.param[::-1], region.upper[::-1], strict=True)]
    pts = " ".join(f"{px:.2f},{py:.2f}" for px, py in (_svg_xy(x, y, size) for x, y in fwd + back))
    return f'<polygon points="{pts}" fill="{color}" fill-opacity="{opacity}" stroke="{color}" stroke-width="0.8"/>'


_PALETTE = ("#1b6ca8", "#c23b22", "#2e8540", "#8a4fbf", "#c98a00", "#3aa6a6", "#a83272")


def svg_overlay(
    path,
    polylines=(),
    strips=(),
    cell_mask=None,
    density=None,
    pieces=(),
    size=DEFAULT_SIZE,
):
    """Compose an SVG of the unit square with optional layers.

    ``density`` is embedded as a rasterized PNG layer; ``cell_mask`` draws
    occupied grid cells; ``polylines``/``strips`` take (object, color) pairs
    or bare objects; ``pieces`` draws coverage pieces labeled by their set.
    """
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" '
        f'viewBox="0 0 {size} {size}">',
        f'<rect width="{size}" height="{size}" fill="white"/>',
    ]
    if density is not None:
        v = density.values
        top = v.max()
        norm = (v / top) ** 0.5 if top > 0 else v
        rgb = _colormap(norm)
        img = Image.fromarray(np.transpose(rgb, (1, 0, 2))[::-1], "RGB")
        buf = io.BytesIO()
        img.save(buf, format="PNG")
        b64 = base64.b64encode(buf.getvalue()).decode("ascii")
        parts.append(
            f'<image href="data:image/png;base64,{b64}" x="0" y="0" '
            f'width="{size}" height="{size}" preserveAspectRatio="none" '
            'style="image-rendering:pixelated"/>'
        )
    if cell_mask is not None:
        m = cell_mask.shape[0]
        cell = size / m
        for ix, iy in np.argwhere(cell_mask):
            px, py = _svg_xy(ix / m, (iy + 1) / m, size)
            parts.append(
                f'<rect x="{px:.2f}" y="{py:.2f}" width="{cell:.2f}" height="{cell:.2f}" '
                'fill="#30508c" fill-opacity="0.85"/>'
            )
    for i, item in enumerate(strips):
        region, color = item if isinstance(item, tuple) else (item, _PALETTE[i % len(_PALETTE)])
        parts.append(_strip_element(region, size, color))
    for i, piece in enumerate(pieces):
        x0, x1 = piece.x_interval
        y0, y1 = piece.y_interval
        px, py = _svg_xy(x0, y1, size)
        color = _PALETTE[i % len(_PALETTE)]
        parts.append(
            f'<rect x="{px:.2f}" y="{py:.2f}" width="{(x1 - x0) * size:.2f}" '
            f'height="{(y1 - y0) * size:.2f}" fill="{color}" fill-opacity="0.35" '
            f'stroke="{color}" stroke-width="1"/>'
        )
        cx, cy = _svg_xy(0.5 * (x0 + x1), 0.5 * (y0 + y1), size)
        label = "{" + ",".join(str(s) for s in sorted(piece.theta)) + "}"
        parts.append(
            f'<text x="{cx:.2f}" y="{cy:.2f}" font-size="{size // 60}" '
            f'text-anchor="middle" fill="#222">{label}</text>'
        )
    for i, item in enumerate(polylines):
        poly, color = item if isinstance(item, tuple) else (item, _PALETTE[i % len(_PALETTE)])
        parts.append(_polyline_element(poly, size, color))
    parts.append(f'<rect width="{size}" height="{size}" fill="none" stroke="#444"/>')
    parts.append("</svg>")
    with open(path, "w", encoding="utf8") as fh:
        fh.write("\n".join(parts))
