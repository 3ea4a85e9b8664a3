"""Run artefacts: CSV tables, JSON documents and SVG plots.

Every file is written atomically (temporary file in the target directory,
then ``os.replace``) and every byte depends only on the run data, so two runs
with the same inputs produce identical files.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
import os
import tempfile
from pathlib import Path

import numpy as np

from .errors import IoFailure, MalformedCsv

TRAJECTORY_HEADER = ("t", "ray_id", "x", "z", "px", "pz", "R", "W", "H_drift", "flags")
METRICS_HEADER = ("t", "z_axis", "envelope_plus", "envelope_minus", "rms_width",
                  "peak_intensity", "axial_pz")


def fmt_array(values):
    """Scientific notation rounded to 9 significant digits, trailing zeros dropped.

    For normal doubles this is the shortest decimal that rounds back to the
    9-digit value, e.g. ``0.1 -> 1e-01`` and ``1/3 -> 3.33333333e-01``.
    """
    values = np.asarray(values, dtype=float).ravel()
    text = np.char.mod("%.8e", values)
    mant, _, expo = np.char.partition(text, "e").T
    mant = np.char.rstrip(np.char.rstrip(mant, "0"), ".")
    return np.where(np.isfinite(values), np.char.add(np.char.add(mant, "e"), expo), text)


def fmt(value):
    return str(fmt_array([value])[0])


def _umask():
    mask = os.umask(0)
    os.umask(mask)
    return mask


def atomic_write(path, data):
    """Write ``data`` (str or bytes) to ``path`` via a same-directory temp file."""
    path = Path(path)
    payload = data.encode() if isinstance(data, str) else data
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
        try:
            with os.fdopen(fd, "wb") as fh:
                fh.write(payload)
            os.chmod(tmp, 0o666 & ~_umask())
            os.replace(tmp, path)
        except BaseException:
            if os.path.exists(tmp):
                os.unlink(tmp)
            raise
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from exc
    return hashlib.sha256(payload).hexdigest()


def trajectories_csv(log):
    """All recorded samples, one row per ray per sample."""
    n_s, n_r = log.n_samples, log.n_rays
    cols = [
        fmt_array(np.repeat(log.t, n_r)),
        np.tile(log.ids, n_s).astype(str),
        fmt_array(log.pos[..., 0]), fmt_array(log.pos[..., 1]),
        fmt_array(log.mom[..., 0]), fmt_array(log.mom[..., 1]),
        fmt_array(log.amp), fmt_array(log.W), fmt_array(log.H_drift),
        log.flags.ravel().astype(str),
    ]
    lines = [",".join(TRAJECTORY_HEADER)]
    lines.extend(",".join(row) for row in zip(*(c.tolist() for c in cols)))
    return "\n".join(lines) + "\n"


def metrics_csv(metrics):
    cols = [fmt_array([getattr(m, k) for m in metrics]).tolist() for k in METRICS_HEADER]
    lines = [",".join(METRICS_HEADER)]
    lines.extend(",".join(row) for row in zip(*cols))
    return "\n".join(lines) + "\n"


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else repr(v)
    if hasattr(obj, "value") and not isinstance(obj, (str, int)):
        return obj.value
    return obj


def to_json(obj):
    return json.dumps(_jsonable(obj), indent=2, sort_keys=True) + "\n"


def read_trajectories_csv(path):
    """Parse a trajectories table back into ``{column: array}``.

    Raises
    ------
    IoFailure
        The file cannot be read.
    MalformedCsv
        Wrong header, ragged rows or unparsable numbers.
    """
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise IoFailure(f"cannot read {path}: {exc}") from exc
    rows = list(csv.reader(io.StringIO(text)))
    if not rows or tuple(rows[0]) != TRAJECTORY_HEADER:
        raise MalformedCsv(f"{path}: header must be {','.join(TRAJECTORY_HEADER)}")
    body = rows[1:]
    if not body:
        raise MalformedCsv(f"{path}: no data rows")
    for i, row in enumerate(body, start=2):
        if len(row) != len(TRAJECTORY_HEADER):
            raise MalformedCsv(f"{path}:{i}: expected {len(TRAJECTORY_HEADER)} fields, got {len(row)}")
    try:
        table = np.array(body, dtype=float)
    except ValueError as exc:
        raise MalformedCsv(f"{path}: {exc}") from exc
    return {name: table[:, j] for j, name in enumerate(TRAJECTORY_HEADER)}


def _samples(data):
    """Reshape flat CSV columns to ``[sample, ray]`` arrays."""
    t = data["t"]
    times, first = np.unique(t, return_index=True)
    order = np.argsort(first)
    times = times[order]
    n_s = len(times)
    if len(t) % n_s:
        raise MalformedCsv("rows are not a whole number of samples")
    n_r = len(t) // n_s
    shaped = {k: v.reshape(n_s, n_r) for k, v in data.items()}
    if not np.all(shaped["ray_id"] == shaped["ray_id"][0]):
        raise MalformedCsv("ray ids differ between samples")
    return shaped


# ---------------------------------------------------------------- SVG

_W, _H, _PAD = 640.0, 400.0, 40.0


def _scale(lo, hi, a, b):
    if hi - lo <= 0:
        lo, hi = lo - 0.5, hi + 0.5
    return lambda v: a + (np.asarray(v) - lo) * (b - a) / (hi - lo)


def _poly(xs, ys, style):
    pts = " ".join(f"{x:.2f},{y:.2f}" for x, y in zip(xs, ys))
    return f'<polyline points="{pts}" {style}/>'


def _axes(x0, y0, w, h, label_x, label_y, lim_x, lim_y):
    return [
        f'<rect x="{x0:.2f}" y="{y0:.2f}" width="{w:.2f}" height="{h:.2f}" fill="none" stroke="#000"/>',
        f'<text x="{x0 + w / 2:.2f}" y="{y0 + h + 28:.2f}" text-anchor="middle" font-size="12">{label_x}</text>',
        f'<text x="{x0 - 28:.2f}" y="{y0 + h / 2:.2f}" text-anchor="middle" font-size="12" '
        f'transform="rotate(-90 {x0 - 28:.2f} {y0 + h / 2:.2f})">{label_y}</text>',
        f'<text x="{x0:.2f}" y="{y0 + h + 14:.2f}" font-size="10">{lim_x[0]:.4g}</text>',
        f'<text x="{x0 + w:.2f}" y="{y0 + h + 14:.2f}" text-anchor="end" font-size="10">{lim_x[1]:.4g}</text>',
        f'<text x="{x0 - 4:.2f}" y="{y0 + h:.2f}" text-anchor="end" font-size="10">{lim_y[0]:.4g}</text>',
        f'<text x="{x0 - 4:.2f}" y="{y0 + 10:.2f}" text-anchor="end" font-size="10">{lim_y[1]:.4g}</text>',
    ]


def _trajectory_panel(s, x0, y0, w, h, max_lines=60):
    z, x, ids = s["z"], s["x"], s["ray_id"][0]
    n_r = x.shape[1]
    sx = _scale(float(z.min()), float(z.max()), x0, x0 + w)
    sy = _scale(float(x.min()), float(x.max()), y0 + h, y0)
    x_launch = x[0]
    heavy = {int(np.argmin(np.abs(x_launch + 1.0))), int(np.argmin(np.abs(x_launch - 1.0)))}
    step = max(1, n_r // max_lines)
    chosen = sorted(set(range(0, n_r, step)) | {n_r - 1, n_r // 2} | heavy)
    out = _axes(x0, y0, w, h, "z / w0", "x / w0", (z.min(), z.max()), (x.min(), x.max()))
    if x.shape[0] == 1:
        # a single sample: draw the launch front itself
        out.append(_poly(sx(z[0]), sy(x[0]), 'fill="none" stroke="#1f4e99" stroke-width="1"'))
    for j in chosen:
        style = ('fill="none" stroke="#b2182b" stroke-width="2.5" class="envelope" '
                 f'data-ray="{int(ids[j])}"') if j in heavy else \
                'fill="none" stroke="#777" stroke-width="0.6"'
        if x.shape[0] > 1:
            out.append(_poly(sx(z[:, j]), sy(x[:, j]), style))
    return out


def _intensity_panel(s, x0, y0, w, h):
    x, amp = s["x"], s["R"]
    i2 = amp**2
    sx = _scale(float(x.min()), float(x.max()), x0, x0 + w)
    sy = _scale(0.0, float(i2.max()) * 1.05, y0 + h, y0)
    out = _axes(x0, y0, w, h, "x / w0", "R^2", (x.min(), x.max()), (0.0, i2.max() * 1.05))
    out.append(_poly(sx(x[0]), sy(i2[0]), 'fill="none" stroke="#1f4e99" stroke-width="1.5" class="initial"'))
    if x.shape[0] > 1:
        out.append(_poly(sx(x[-1]), sy(i2[-1]), 'fill="none" stroke="#b2182b" stroke-width="1.5" class="final"'))
    return out


def _svg(width, height, body):
    head = (f'<svg xmlns="http://www.w3.org/2000/svg" width="{width:.0f}" height="{height:.0f}" '
            f'viewBox="0 0 {width:.0f} {height:.0f}">')
    return "\n".join([head, '<rect width="100%" height="100%" fill="#fff"/>', *body, "</svg>"]) + "\n"


def trajectories_svg(data):
    """Trajectory polylines (left) beside initial and final R^2 profiles (right)."""
    s = _samples(data)
    left = _trajectory_panel(s, _PAD + 20, _PAD, _W - 2 * _PAD - 20, _H - 2 * _PAD)
    right = _intensity_panel(s, _W + _PAD, _PAD, _W / 2 - 2 * _PAD, _H - 2 * _PAD)
    return _svg(1.5 * _W, _H, left + right)


def intensity_svg(data):
    s = _samples(data)
    return _svg(_W, _H, _intensity_panel(s, _PAD + 20, _PAD, _W - 2 * _PAD - 20, _H - 2 * _PAD))
