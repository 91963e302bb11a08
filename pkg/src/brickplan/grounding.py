"""Mask alignment, tracking and background dimming for situated manuals.

Image coordinates throughout are array-index coordinates: ``x`` is the
column, ``y`` the row, pixel centers at integers. An affine transform is a
2x3 matrix mapping template coordinates to observed-image coordinates.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

SMOOTH_SIGMA = 1.0
PYRAMID_LEVELS = 3
MAX_ITERATIONS = 200
RHO_EPS = 1e-6
MAX_REJECTIONS = 5
DIM_FACTOR = 0.25
RAMP_PX = 10.0
TRACK_RADIUS = 16
TRACK_MIN_NCC = 0.5


class GroundingError(Exception):
    pass


class DegenerateInput(GroundingError):
    pass


class Diverged(GroundingError):
    pass


class NonInvertibleWarp(GroundingError):
    pass


class EmptyMask(GroundingError):
    pass


class GroundingFailed(GroundingError):
    pass


@dataclass(frozen=True)
class AffineTransform:
    matrix: np.ndarray

    def __post_init__(self):
        m = np.array(self.matrix, dtype=float).reshape(2, 3)
        object.__setattr__(self, "matrix", m)

    @classmethod
    def identity(cls) -> "AffineTransform":
        return cls(np.eye(2, 3))

    @classmethod
    def translation(cls, tx: float, ty: float) -> "AffineTransform":
        return cls(np.array([[1.0, 0.0, tx], [0.0, 1.0, ty]]))

    @classmethod
    def from_params(cls, p) -> "AffineTransform":
        return cls(np.asarray(p, dtype=float).reshape(2, 3))

    @property
    def params(self) -> np.ndarray:
        return self.matrix.reshape(-1).copy()

    @property
    def det(self) -> float:
        return float(np.linalg.det(self.matrix[:, :2]))

    def homogeneous(self) -> np.ndarray:
        return np.vstack([self.matrix, [0.0, 0.0, 1.0]])

    def inverse(self) -> "AffineTransform":
        if abs(self.det) <= 1e-8:
            raise NonInvertibleWarp(f"affine linear part is singular (det={self.det:.3e})")
        return AffineTransform(np.linalg.inv(self.homogeneous())[:2])

    def apply(self, points) -> np.ndarray:
        pts = np.asarray(points, dtype=float)
        return pts @ self.matrix[:, :2].T + self.matrix[:, 2]

    def to_list(self) -> list[list[float]]:
        return self.matrix.tolist()


@dataclass
class AlignmentResult:
    H: AffineTransform
    rho: float
    iterations: int
    converged: bool

    def to_dict(self) -> dict:
        return {
            "H": self.H.to_list(),
            "rho": self.rho,
            "iterations": self.iterations,
            "converged": self.converged,
        }


@dataclass
class SituatedManual:
    image: np.ndarray
    masks: dict[str, np.ndarray]
    H: AffineTransform
    step: object
    alignment: AlignmentResult | None = None


@dataclass
class Track:
    mask: np.ndarray
    lost: bool
    shift: tuple[int, int] = (0, 0)
    score: float = 0.0


# -- interpolation ----------------------------------------------------------

_KEYS_A = -0.5


def _keys(s: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Keys cubic convolution kernel and its derivative."""
    a = _KEYS_A
    t = np.abs(s)
    sg = np.sign(s)
    t2, t3 = t * t, t * t * t
    near = t <= 1.0
    far = (t > 1.0) & (t < 2.0)
    k = np.where(near, (a + 2) * t3 - (a + 3) * t2 + 1, np.where(far, a * t3 - 5 * a * t2 + 8 * a * t - 4 * a, 0.0))
    dk = np.where(near, 3 * (a + 2) * t2 - 2 * (a + 3) * t, np.where(far, 3 * a * t2 - 10 * a * t + 8 * a, 0.0))
    return k, dk * sg


def sample(img: np.ndarray, xs: np.ndarray, ys: np.ndarray, with_grad: bool = False):
    """Bicubic (Keys) samples of ``img`` at (xs, ys), replicating edge pixels outside the image.

    With ``with_grad`` also returns the exact derivatives of the interpolant
    with respect to x and y.
    """
    pad = 4
    h, w = img.shape
    P = np.pad(np.asarray(img, dtype=float), pad, mode="edge")
    shape = np.shape(xs)
    xs = np.clip(np.asarray(xs, dtype=float).ravel(), -3.0, w + 1.5)
    ys = np.clip(np.asarray(ys, dtype=float).ravel(), -3.0, h + 1.5)
    x0 = np.floor(xs).astype(np.int64)
    y0 = np.floor(ys).astype(np.int64)
    fx = xs - x0
    fy = ys - y0
    taps = (-1, 0, 1, 2)
    kx, ky = zip(*(_keys(fx - m) for m in taps)), zip(*(_keys(fy - m) for m in taps))
    (kx, dkx), (ky, dky) = kx, ky
    val = np.zeros_like(xs)
    gx = np.zeros_like(xs)
    gy = np.zeros_like(xs)
    for j, my in enumerate(taps):
        yi = y0 + my + pad
        row_val = np.zeros_like(xs)
        row_dx = np.zeros_like(xs)
        for i, mx in enumerate(taps):
            v = P[yi, x0 + mx + pad]
            row_val += kx[i] * v
            if with_grad:
                row_dx += dkx[i] * v
        val += ky[j] * row_val
        if with_grad:
            gx += ky[j] * row_dx
            gy += dky[j] * row_val
    if with_grad:
        return val.reshape(shape), gx.reshape(shape), gy.reshape(shape)
    return val.reshape(shape)


def warp_image(img: np.ndarray, H: AffineTransform, shape: tuple[int, int] | None = None) -> np.ndarray:
    """Resample ``img`` so that output(x) = img(H^-1 x) (bicubic, edge pixels replicated)."""
    h, w = shape or img.shape
    inv = H.inverse()
    yy, xx = np.mgrid[0:h, 0:w].astype(float)
    src = inv.apply(np.stack([xx.ravel(), yy.ravel()], axis=1))
    return sample(img, src[:, 0], src[:, 1]).reshape(h, w)


# -- ECC ------------------------------------------------------------------

def _prepare(img, name: str) -> np.ndarray:
    a = np.asarray(img, dtype=float)
    if a.ndim != 2:
        raise DegenerateInput(f"{name} must be a single-channel image")
    if not np.any(a) or float(a.std()) == 0.0:
        raise DegenerateInput(f"{name} has zero intensity variance")
    if a.max() > 1.0:
        a = a / a.max()
    return ndimage.gaussian_filter(a, SMOOTH_SIGMA, mode="nearest")


def _grid(shape):
    h, w = shape
    yy, xx = np.mgrid[0:h, 0:w].astype(float)
    return xx.ravel(), yy.ravel()


class _Level:
    """Zero-mean template and coordinate grid for one pyramid level."""

    def __init__(self, template: np.ndarray, image: np.ndarray):
        self.image = image
        self.x, self.y = _grid(template.shape)
        t = template.ravel()
        self.t = t - t.mean()
        self.tn = float(np.linalg.norm(self.t))

    def warped(self, p: np.ndarray, with_grad: bool = False):
        xw = p[0] * self.x + p[1] * self.y + p[2]
        yw = p[3] * self.x + p[4] * self.y + p[5]
        return sample(self.image, xw, yw, with_grad)

    def rho(self, p: np.ndarray) -> float:
        i = self.warped(p)
        i = i - i.mean()
        n = float(np.linalg.norm(i))
        if n == 0.0 or self.tn == 0.0:
            return -1.0
        return float(self.t @ i) / (self.tn * n)

    def jacobian(self, gx, gy) -> np.ndarray:
        x, y = self.x, self.y
        return np.stack([gx * x, gx * y, gx, gy * x, gy * y, gy], axis=1)

    def rho_and_gradient(self, p: np.ndarray) -> tuple[float, np.ndarray]:
        iw, gx, gy = self.warped(p, with_grad=True)
        i = iw - iw.mean()
        n = float(np.linalg.norm(i))
        rho = float(self.t @ i) / (self.tn * n)
        G = self.jacobian(gx, gy)
        grad = G.T @ (self.t / (self.tn * n) - rho * i / (n * n))
        return rho, grad

    def update(self, p: np.ndarray) -> tuple[float, np.ndarray]:
        """Forward-additive ECC step: returns (rho at p, delta p)."""
        iw, gx, gy = self.warped(p, with_grad=True)
        i = iw - iw.mean()
        n = float(np.linalg.norm(i))
        if n == 0.0:
            raise Diverged("warped image has no overlap with the template")
        t = self.t
        corr = float(t @ i)
        rho = corr / (self.tn * n)
        G = self.jacobian(gx, gy)
        G = G - G.mean(axis=0)
        hess = G.T @ G
        try:
            hinv = np.linalg.inv(hess)
        except np.linalg.LinAlgError:
            hinv = np.linalg.pinv(hess)
        ip = G.T @ i
        tp = G.T @ t
        lam_n = n * n - ip @ hinv @ ip
        lam_d = corr - tp @ hinv @ ip
        if lam_d > 0:
            lam = lam_n / lam_d
        else:
            # ECC fallback for a non-positive denominator
            tht = tp @ hinv @ tp
            lam1 = math.sqrt(max(ip @ hinv @ ip, 0.0) / tht) if tht > 0 else 0.0
            lam2 = (ip @ hinv @ tp - corr) / tht if tht > 0 else 0.0
            lam = max(lam1, lam2)
        delta = hinv @ (G.T @ (lam * t - i))
        return rho, delta


def _downsample(a: np.ndarray) -> np.ndarray:
    h, w = (a.shape[0] // 2) * 2, (a.shape[1] // 2) * 2
    a = a[:h, :w]
    return 0.25 * (a[0::2, 0::2] + a[1::2, 0::2] + a[0::2, 1::2] + a[1::2, 1::2])


# fine = 2 * coarse + 0.5 for 2x2 block-mean downsampling
_UP = np.array([[2.0, 0.0, 0.5], [0.0, 2.0, 0.5], [0.0, 0.0, 1.0]])
_DOWN = np.linalg.inv(_UP)


def _to_coarse(p: np.ndarray) -> np.ndarray:
    M = np.vstack([p.reshape(2, 3), [0, 0, 1]])
    return (_DOWN @ M @ _UP)[:2].ravel()


def _to_fine(p: np.ndarray) -> np.ndarray:
    M = np.vstack([p.reshape(2, 3), [0, 0, 1]])
    return (_UP @ M @ _DOWN)[:2].ravel()


def _check_warp(p: np.ndarray) -> None:
    if not np.all(np.isfinite(p)):
        raise NonInvertibleWarp("warp parameters are not finite")
    if abs(p[0] * p[4] - p[1] * p[3]) <= 1e-8:
        raise NonInvertibleWarp("warp became singular")


def _optimize_level(level: _Level, p: np.ndarray, max_iterations: int) -> tuple[np.ndarray, float, int, bool, int]:
    """Maximize rho at one level. Returns (p, rho, iterations, converged, trailing rejections)."""
    rho = level.rho(p)
    rejections = 0
    for it in range(1, max_iterations + 1):
        _, delta = level.update(p)
        step = 1.0
        accepted = False
        while rejections < MAX_REJECTIONS:
            cand = p + step * delta
            _check_warp(cand)
            new_rho = level.rho(cand)
            if new_rho >= rho:
                accepted = True
                break
            rejections += 1
            step *= 0.5
        if not accepted:
            return p, rho, it, True, rejections
        rejections = 0
        gain = new_rho - rho
        p, rho = cand, new_rho
        if gain < RHO_EPS:
            return p, rho, it, True, 0
    return p, rho, max_iterations, False, rejections


def ecc_align(
    template,
    observed,
    init: AffineTransform | None = None,
    levels: int = PYRAMID_LEVELS,
    max_iterations: int = MAX_ITERATIONS,
) -> AlignmentResult:
    """Affine ECC registration of ``template`` onto ``observed``.

    Inputs are masks or grayscale images of equal shape. Both are smoothed
    with a Gaussian (sigma 1 px) and aligned coarse to fine over a 2x
    pyramid; at each level forward-additive ECC updates are taken, a step
    that would lower rho is halved, and the level ends once rho improves by
    less than 1e-6, after 5 consecutive rejected steps, or after
    ``max_iterations``.
    """
    if np.shape(template) != np.shape(observed):
        raise DegenerateInput("template and observed image must have the same shape")
    T = _prepare(template, "template")
    I = _prepare(observed, "observed")
    p = (init or AffineTransform.identity()).params
    _check_warp(p)
    pyramid = [(T, I)]
    for _ in range(levels - 1):
        t, i = pyramid[-1]
        if min(t.shape) < 16:
            break
        pyramid.append((_downsample(t), _downsample(i)))
    for _ in range(len(pyramid) - 1):
        p = _to_coarse(p)

    fine = _Level(T, I)
    init_rho = fine.rho((init or AffineTransform.identity()).params)
    total = 0
    converged = False
    rejections = 0
    for k in range(len(pyramid) - 1, -1, -1):
        level = fine if k == 0 else _Level(*pyramid[k])
        p, rho, its, converged, rejections = _optimize_level(level, p, max_iterations)
        total += its
        if k > 0:
            p = _to_fine(p)
    if rejections >= MAX_REJECTIONS and rho < init_rho:
        raise Diverged(f"rho fell from {init_rho:.4f} to {rho:.4f}")
    return AlignmentResult(AffineTransform.from_params(p), float(rho), total, converged)


def ecc_objective(template, observed):
    """Smoothed-input rho(p) and its analytic gradient, as used by :func:`ecc_align` at full resolution."""
    level = _Level(_prepare(template, "template"), _prepare(observed, "observed"))
    return level.rho, level.rho_and_gradient


def centroid(mask: np.ndarray) -> tuple[float, float]:
    ys, xs = np.nonzero(mask)
    if xs.size == 0:
        raise EmptyMask("mask is empty")
    return float(xs.mean()), float(ys.mean())


def centroid_init(template: np.ndarray, observed: np.ndarray) -> AffineTransform:
    tx, ty = centroid(template)
    ox, oy = centroid(observed)
    return AffineTransform.translation(ox - tx, oy - ty)


def warp_mask(mask: np.ndarray, H: AffineTransform, shape: tuple[int, int] | None = None) -> np.ndarray:
    """Nearest-neighbor inverse-mapped warp of a binary mask (output(x) = mask(H^-1 x))."""
    inv = H.inverse()
    src = np.asarray(mask).astype(bool)
    h, w = shape or src.shape
    xs, ys = _grid((h, w))
    sx, sy = inv.apply(np.stack([xs, ys], axis=1)).T
    ix = np.floor(sx + 0.5).astype(np.int64)
    iy = np.floor(sy + 0.5).astype(np.int64)
    ok = (ix >= 0) & (ix < src.shape[1]) & (iy >= 0) & (iy < src.shape[0])
    out = np.zeros(h * w, dtype=bool)
    out[ok] = src[iy[ok], ix[ok]]
    return out.reshape(h, w)


# -- overlay ----------------------------------------------------------------

def attenuation(d: np.ndarray) -> np.ndarray:
    """1 inside the mask, a linear ramp from 1 to 0.25 over 10 px, then 0.25."""
    d = np.asarray(d, dtype=float)
    ramp = DIM_FACTOR + (1.0 - DIM_FACTOR) * (1.0 - d / RAMP_PX)
    return np.where(d == 0.0, 1.0, np.where(d <= RAMP_PX, ramp, DIM_FACTOR))


def overlay_dimming(observation: np.ndarray, masks) -> np.ndarray:
    img = np.asarray(observation)
    if img.ndim != 3 or img.shape[2] != 3:
        raise ValueError("observation must be an H x W x 3 image")
    union = np.zeros(img.shape[:2], dtype=bool)
    for m in masks:
        m = np.asarray(m)
        if m.shape != union.shape:
            raise ValueError(f"mask shape {m.shape} does not match observation {union.shape}")
        union |= m.astype(bool)
    if union.any():
        d = ndimage.distance_transform_edt(~union)
    else:
        d = np.full(union.shape, np.inf)
    a = attenuation(d)
    # round half up
    out = np.floor(img.astype(float) * a[..., None] + 0.5)
    return np.clip(out, 0, 255).astype(np.uint8)


# -- tracking ---------------------------------------------------------------

def _gray(img: np.ndarray) -> np.ndarray:
    a = np.asarray(img, dtype=float)
    return a.mean(axis=2) if a.ndim == 3 else a


def _best_shift(prev_gray, next_gray, support, radius):
    ys, xs = np.nonzero(support)
    a = prev_gray[ys, xs]
    a = a - a.mean()
    an = float(np.linalg.norm(a))
    if an == 0.0:
        return (0, 0), 0.0
    padded = np.pad(next_gray, radius)
    shifts = [(dx, dy) for dy in range(-radius, radius + 1) for dx in range(-radius, radius + 1)]
    # ties go to the smallest displacement
    shifts.sort(key=lambda s: (s[0] ** 2 + s[1] ** 2, s[1], s[0]))
    dxs = np.array([s[0] for s in shifts])
    dys = np.array([s[1] for s in shifts])
    B = padded[ys[None, :] + dys[:, None] + radius, xs[None, :] + dxs[:, None] + radius]
    B = B - B.mean(axis=1, keepdims=True)
    bn = np.linalg.norm(B, axis=1)
    with np.errstate(invalid="ignore", divide="ignore"):
        ncc = np.where(bn > 0, (B @ a) / (an * bn), 0.0)
    k = int(np.argmax(ncc))
    return shifts[k], float(ncc[k])


def _shift_mask(mask: np.ndarray, dx: int, dy: int) -> np.ndarray:
    return warp_mask(mask, AffineTransform.translation(dx, dy))


def track_masks(
    prev_masks: dict[str, np.ndarray],
    prev_frame: np.ndarray,
    next_frame: np.ndarray,
    radius: int = TRACK_RADIUS,
    min_ncc: float = TRACK_MIN_NCC,
    color_tol: float = 24.0,
) -> dict[str, Track]:
    """Propagate entity masks from one frame to the next.

    Each entity is followed by the integer translation that maximizes the
    normalized cross-correlation of its patch (the mask grown by 3 px)
    within +-``radius`` px. The shifted mask is then re-binarized by a
    color-similarity flood fill from the pixel nearest its centroid; the fill
    uses the entity's colors in the previous frame and may grow at most 2 px
    past the shifted mask. Entities whose best correlation is below
    ``min_ncc`` are reported lost with an empty mask.
    """
    prev_frame = np.asarray(prev_frame)
    next_frame = np.asarray(next_frame)
    if prev_frame.shape != next_frame.shape:
        raise ValueError("frames must have the same shape")
    pg, ng = _gray(prev_frame), _gray(next_frame)
    color_prev = prev_frame.reshape(prev_frame.shape[:2] + (-1,)).astype(float)
    color_next = next_frame.reshape(next_frame.shape[:2] + (-1,)).astype(float)
    out: dict[str, Track] = {}
    for name in sorted(prev_masks):
        mask = np.asarray(prev_masks[name]).astype(bool)
        if not mask.any():
            out[name] = Track(np.zeros_like(mask), True)
            continue
        support = ndimage.binary_dilation(mask, iterations=3)
        (dx, dy), score = _best_shift(pg, ng, support, radius)
        if score < min_ncc:
            out[name] = Track(np.zeros_like(mask), True, (dx, dy), score)
            continue
        moved = _shift_mask(mask, dx, dy)
        if not moved.any():
            out[name] = Track(moved, True, (dx, dy), score)
            continue
        colors, counts = np.unique(color_prev[mask], axis=0, return_counts=True)
        palette = colors[counts >= max(1, int(0.01 * mask.sum()))]
        dist = np.min(np.linalg.norm(color_next[..., None, :] - palette[None, None], axis=-1), axis=-1)
        similar = (dist <= color_tol) & ndimage.binary_dilation(moved, iterations=2)
        labels, _ = ndimage.label(similar)
        cx, cy = centroid(moved)
        ys, xs = np.nonzero(moved)
        k = int(np.argmin((xs - cx) ** 2 + (ys - cy) ** 2))
        seed = labels[ys[k], xs[k]]
        if seed == 0:
            hits = labels[moved & (labels > 0)]
            seed = int(np.bincount(hits).argmax()) if hits.size else 0
        filled = labels == seed if seed else moved
        out[name] = Track(filled, False, (dx, dy), score)
    return out


# -- pipeline ---------------------------------------------------------------

def ground_step(
    step,
    reference_masks: dict[str, np.ndarray],
    observation: np.ndarray,
    observed_masks: dict[str, np.ndarray],
    rho_threshold: float = 0.8,
) -> SituatedManual:
    """Project a step's reference-brick mask into the observation and dim the rest.

    ``reference_masks`` holds the rendered ``str`` and ``ref`` masks;
    ``observed_masks`` holds the segmented ``str``, ``grip`` and ``tgt``
    masks of the observation.
    """
    m_str_ref = np.asarray(reference_masks["str"]).astype(bool)
    m_str_obs = np.asarray(observed_masks["str"]).astype(bool)
    if not m_str_obs.any() or not m_str_ref.any():
        raise EmptyMask("structure mask is empty; nothing to align")
    init = centroid_init(m_str_ref, m_str_obs)
    result = ecc_align(m_str_ref.astype(float), m_str_obs.astype(float), init)
    if result.rho < rho_threshold:
        raise GroundingFailed(f"alignment correlation {result.rho:.3f} below {rho_threshold}")
    shape = np.asarray(observation).shape[:2]
    m_ref = warp_mask(reference_masks["ref"], result.H, shape)
    masks = {
        "ref": m_ref,
        "grip": np.asarray(observed_masks.get("grip", np.zeros(shape, bool))).astype(bool),
        "tgt": np.asarray(observed_masks.get("tgt", np.zeros(shape, bool))).astype(bool),
    }
    image = overlay_dimming(observation, [masks["ref"], masks["grip"], masks["tgt"]])
    return SituatedManual(image, masks, result.H, step, result)
