"""Two-view stochastic augmentation for image batches.

Each input image is distorted twice — once per view, with per-view
parameters — through the fixed pipeline: random crop, horizontal flip,
color jitter, color drop (grayscale), Gaussian blur, solarization. All
pixel values stay in [0, 1], shapes are preserved (crops are resized back
bicubically), and a given (seed, policy, batch) triple fully determines
both outputs.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, ContractError, DimensionError
from .numeric import Rng

BT601_LUMA = (0.299, 0.587, 0.114)


@dataclass(frozen=True)
class ViewParams:
    """Per-view application probabilities and jitter intensities."""

    crop_prob: float = 0.0
    flip_prob: float = 0.0
    brightness: float = 0.0
    contrast: float = 0.0
    saturation: float = 0.0
    hue: float = 0.0
    grayscale_prob: float = 0.0
    blur_prob: float = 0.0
    solarize_prob: float = 0.0

    def __post_init__(self):
        for name in ("crop_prob", "flip_prob", "grayscale_prob", "blur_prob", "solarize_prob"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ConfigError(f"{name} must be in [0, 1], got {v}")
        for name in ("brightness", "contrast", "saturation", "hue"):
            if getattr(self, name) < 0.0:
                raise ConfigError(f"{name} intensity must be >= 0, got {getattr(self, name)}")


@dataclass(frozen=True)
class AugmentPolicy:
    """Full two-view policy: per-view parameters plus shared ranges."""

    view1: ViewParams = field(default_factory=ViewParams)
    view2: ViewParams = field(default_factory=ViewParams)
    crop_area: tuple = (0.08, 1.0)
    crop_aspect: tuple = (3.0 / 4.0, 4.0 / 3.0)
    blur_sigma: tuple = (0.1, 1.0)
    blur_kernel: int = 0  # 0 = derive from image size
    luma_weights: tuple = BT601_LUMA

    def __post_init__(self):
        if not (0.0 < self.crop_area[0] <= self.crop_area[1] <= 1.0):
            raise ConfigError(f"crop_area must satisfy 0 < lo <= hi <= 1, got {self.crop_area}")
        if not (0.0 < self.blur_sigma[0] <= self.blur_sigma[1]):
            raise ConfigError(f"blur_sigma must satisfy 0 < lo <= hi, got {self.blur_sigma}")
        if self.blur_kernel and (self.blur_kernel % 2 == 0 or self.blur_kernel < 3):
            raise ConfigError(f"blur_kernel must be odd and >= 3, got {self.blur_kernel}")

    @staticmethod
    def default() -> "AugmentPolicy":
        """Standard two-view regime: always crop, flip half the time,
        moderate jitter, blur view 1 aggressively and solarize only view 2."""
        return AugmentPolicy(
            view1=ViewParams(
                crop_prob=1.0, flip_prob=0.5, brightness=0.4, contrast=0.4,
                saturation=0.2, hue=0.1, grayscale_prob=0.2, blur_prob=1.0,
                solarize_prob=0.0,
            ),
            view2=ViewParams(
                crop_prob=1.0, flip_prob=0.5, brightness=0.4, contrast=0.4,
                saturation=0.2, hue=0.1, grayscale_prob=0.2, blur_prob=0.1,
                solarize_prob=0.2,
            ),
        )

    @staticmethod
    def identity() -> "AugmentPolicy":
        """No-op policy: both views pass through bit-equal."""
        return AugmentPolicy()

    def kernel_size(self, h: int, w: int) -> int:
        """Blur kernel side: configured value, or the largest odd integer
        <= max(3, round(0.1 * min(h, w)))."""
        if self.blur_kernel:
            return self.blur_kernel
        m = max(3, int(round(0.1 * min(h, w))))
        return m if m % 2 == 1 else m - 1


class ImageBatch:
    """Batch of images, shape (n, c, h, w), float64 pixels in [0, 1]."""

    __slots__ = ("data",)

    def __init__(self, data: np.ndarray):
        arr = np.asarray(data, dtype=np.float64)
        if arr.ndim != 4:
            raise DimensionError(f"ImageBatch expects (n, c, h, w), got shape {arr.shape}")
        if arr.shape[1] not in (1, 3):
            raise ContractError(f"ImageBatch supports 1 or 3 channels, got {arr.shape[1]}")
        if arr.size and (arr.min() < 0.0 or arr.max() > 1.0):
            raise ContractError("ImageBatch pixels must lie in [0, 1]")
        self.data = arr

    @property
    def n(self) -> int:
        return self.data.shape[0]

    @property
    def c(self) -> int:
        return self.data.shape[1]

    @property
    def h(self) -> int:
        return self.data.shape[2]

    @property
    def w(self) -> int:
        return self.data.shape[3]

    def take(self, indices) -> "ImageBatch":
        return ImageBatch(self.data[np.asarray(indices)])


# -- bicubic resampling -------------------------------------------------------


def _cubic_kernel(t: np.ndarray) -> np.ndarray:
    """Keys cubic convolution kernel (a = -0.5)."""
    at = np.abs(t)
    near = 1.5 * at ** 3 - 2.5 * at ** 2 + 1.0
    far = -0.5 * (at ** 3 - 5.0 * at ** 2 + 8.0 * at - 4.0)
    return np.where(at <= 1.0, near, np.where(at < 2.0, far, 0.0))

def _resample_matrix(n_out: int, n_in: int, start: float, length: float) -> np.ndarray:
    """Weights mapping n_in source samples onto n_out targets for the
    source interval [start, start + length), half-pixel-centre convention,
    borders clamped (replicated)."""
    pos = start + (np.arange(n_out) + 0.5) * (length / n_out) - 0.5
    base = np.floor(pos).astype(int)
    rows = np.arange(n_out)
    mat = np.zeros((n_out, n_in))
    for k in range(-1, 3):
        idx = np.clip(base + k, 0, n_in - 1)
        np.add.at(mat, (rows, idx), _cubic_kernel(pos - (base + k)))
    return mat


def resize_bicubic(img: np.ndarray, out_h: int, out_w: int, box=None) -> np.ndarray:
    """Bicubic resample of a (c, h, w) image region to (c, out_h, out_w).

    `box` is (row0, col0, height, width) in source pixels; default is the
    whole image. Output is clamped to [0, 1].
    """
    c, h, w = img.shape
    r0, c0, bh, bw = box if box is not None else (0, 0, h, w)
    wr = _resample_matrix(out_h, h, float(r0), float(bh))
    wc = _resample_matrix(out_w, w, float(c0), float(bw))
    out = np.einsum("ik,ckl,jl->cij", wr, img, wc)
    return np.clip(out, 0.0, 1.0)


# -- individual augmentations --------------------------------------------------


def random_crop(img: np.ndarray, area_range, rng: Rng, aspect_range=(3.0 / 4.0, 4.0 / 3.0)) -> np.ndarray:
    """Crop a random patch and resize it back to the input size.

    The patch area fraction is uniform over `area_range`, aspect ratio
    (width/height) uniform over `aspect_range`; after 10 infeasible draws
    the whole image is used.
    """
    c, h, w = img.shape
    if h < 4 or w < 4:
        raise ContractError(f"random_crop needs images of at least 4x4 pixels, got {h}x{w}")
    for _ in range(10):
        area = rng.uniform(area_range[0], area_range[1]) * h * w
        aspect = rng.uniform(aspect_range[0], aspect_range[1])
        ch = int(round((area / aspect) ** 0.5))
        cw = int(round((area * aspect) ** 0.5))
        if 1 <= ch <= h and 1 <= cw <= w:
            r0 = rng.randint(h - ch + 1)
            c0 = rng.randint(w - cw + 1)
            return resize_bicubic(img, h, w, box=(r0, c0, ch, cw))
    return resize_bicubic(img, h, w, box=(0, 0, h, w))


def _luma(img: np.ndarray, weights=BT601_LUMA) -> np.ndarray:
    return weights[0] * img[0] + weights[1] * img[1] + weights[2] * img[2]


def color_drop(img: np.ndarray, luma_weights=BT601_LUMA) -> np.ndarray:
    """Replace all three channels by the luma-weighted grayscale plane."""
    if img.shape[0] != 3:
        raise ContractError(f"color_drop needs a 3-channel image, got {img.shape[0]} channels")
    gray = _luma(img, luma_weights)
    return np.repeat(gray[None], 3, axis=0)


def _adjust_brightness(img, factor):
    return np.clip(img * factor, 0.0, 1.0)


def _adjust_contrast(img, factor):
    mean = _luma(img).mean() if img.shape[0] == 3 else img.mean()
    return np.clip(mean + factor * (img - mean), 0.0, 1.0)


def _adjust_saturation(img, factor):
    gray = _luma(img)
    return np.clip(gray[None] + factor * (img - gray[None]), 0.0, 1.0)


def _rgb_to_hsv(img: np.ndarray) -> np.ndarray:
    r, g, b = img
    mx = img.max(axis=0)
    mn = img.min(axis=0)
    diff = mx - mn
    safe = np.where(diff > 0.0, diff, 1.0)
    hue = np.where(
        mx == r, ((g - b) / safe) % 6.0, np.where(mx == g, (b - r) / safe + 2.0, (r - g) / safe + 4.0)
    ) / 6.0
    hue = np.where(diff > 0.0, hue, 0.0)
    sat = np.where(mx > 0.0, diff / np.where(mx > 0.0, mx, 1.0), 0.0)
    return np.stack([hue, sat, mx])


def _hsv_to_rgb(hsv: np.ndarray) -> np.ndarray:
    h, s, v = hsv
    k = (h % 1.0) * 6.0
    i = np.floor(k)
    f = k - i
    p = v * (1.0 - s)
    q = v * (1.0 - s * f)
    t = v * (1.0 - s * (1.0 - f))
    i = i.astype(int) % 6
    r = np.choose(i, [v, q, p, p, t, v])
    g = np.choose(i, [t, v, v, q, p, p])
    b = np.choose(i, [p, p, t, v, v, q])
    return np.stack([r, g, b])


def _adjust_hue(img, offset):
    hsv = _rgb_to_hsv(img)
    hsv[0] = (hsv[0] + offset) % 1.0
    return np.clip(_hsv_to_rgb(hsv), 0.0, 1.0)


def color_jitter(img: np.ndarray, max_b: float, max_c: float, max_s: float, max_h: float, rng: Rng) -> np.ndarray:
    """Apply brightness/contrast/saturation/hue jitter in a random order.

    Multiplicative factors are uniform over [1-max, 1+max]; the hue offset
    is uniform over [-max_h, +max_h] turns of the hue circle. Adjustments
    with a zero maximum are skipped entirely, and saturation/hue only apply
    to 3-channel images.
    """
    chans = img.shape[0]
    adjustments = []
    if max_b > 0.0:
        adjustments.append(("brightness", max_b))
    if max_c > 0.0:
        adjustments.append(("contrast", max_c))
    if chans == 3 and max_s > 0.0:
        adjustments.append(("saturation", max_s))
    if chans == 3 and max_h > 0.0:
        adjustments.append(("hue", max_h))
    if not adjustments:
        return img
    for j in rng.permutation(len(adjustments)):
        name, mx = adjustments[j]
        if name == "hue":
            img = _adjust_hue(img, rng.uniform(-mx, mx))
        else:
            factor = rng.uniform(1.0 - mx, 1.0 + mx)
            if name == "brightness":
                img = _adjust_brightness(img, factor)
            elif name == "contrast":
                img = _adjust_contrast(img, factor)
            else:
                img = _adjust_saturation(img, factor)
    return img


def _gaussian_weights(m: int, sigma: float) -> np.ndarray:
    offsets = np.arange(m) - m // 2
    w = np.exp(-(offsets ** 2) / (2.0 * sigma * sigma))
    return w / w.sum()


def gaussian_blur(img: np.ndarray, kernel_size: int, sigma_range, rng: Rng) -> np.ndarray:
    """Separable Gaussian blur with sigma ~ U(sigma_range), reflect padding."""
    if kernel_size % 2 == 0 or kernel_size < 3:
        raise ConfigError(f"blur kernel size must be odd and >= 3, got {kernel_size}")
    sigma = rng.uniform(sigma_range[0], sigma_range[1])
    w = _gaussian_weights(kernel_size, sigma)
    r = kernel_size // 2
    out = np.pad(img, ((0, 0), (r, r), (0, 0)), mode="reflect")
    out = sum(w[k] * out[:, k : k + img.shape[1], :] for k in range(kernel_size))
    out = np.pad(out, ((0, 0), (0, 0), (r, r)), mode="reflect")
    out = sum(w[k] * out[:, :, k : k + img.shape[2]] for k in range(kernel_size))
    return np.clip(out, 0.0, 1.0)


def solarize(img: np.ndarray) -> np.ndarray:
    """Pixel map x -> x if x < 0.5 else 1 - x."""
    return np.where(img < 0.5, img, 1.0 - img)


# -- the two-view pipeline -----------------------------------------------------


def _apply_view(img: np.ndarray, vp: ViewParams, policy: AugmentPolicy, kernel: int, rng: Rng) -> np.ndarray:
    if rng.coin(vp.crop_prob):
        img = random_crop(img, policy.crop_area, rng, policy.crop_aspect)
    if rng.coin(vp.flip_prob):
        img = img[:, :, ::-1]
    img = color_jitter(img, vp.brightness, vp.contrast, vp.saturation, vp.hue, rng)
    if img.shape[0] == 3 and rng.coin(vp.grayscale_prob):
        img = color_drop(img, policy.luma_weights)
    if rng.coin(vp.blur_prob):
        img = gaussian_blur(img, kernel, policy.blur_sigma, rng)
    if rng.coin(vp.solarize_prob):
        img = solarize(img)
    return img


def two_views(x: ImageBatch, policy: AugmentPolicy, rng: Rng):
    """Produce two independently distorted views of every image in the batch.

    Returns a pair of ImageBatches with the same shape as the input. Draws
    are consumed per image in a fixed order, so a seed determines both
    views exactly.
    """
    kernel = policy.kernel_size(x.h, x.w)
    view1 = np.empty_like(x.data)
    view2 = np.empty_like(x.data)
    for i in range(x.n):
        img = x.data[i]
        view1[i] = _apply_view(img, policy.view1, policy, kernel, rng)
        view2[i] = _apply_view(img, policy.view2, policy, kernel, rng)
    return ImageBatch(view1), ImageBatch(view2)
