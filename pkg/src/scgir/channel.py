"""Simulated wireless link for latent vectors.

A latent vector is truncated to the configured bandwidth, packed into
complex symbols (consecutive reals as I/Q), normalized to unit average
power, sent through flat block fading plus additive complex Gaussian
noise, MMSE-equalized with receiver channel knowledge, and unpacked back
to a zero-filled real vector. SNR is defined against unit signal power:
noise_var = 10^(-snr_db / 10).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, ContractError, DimensionError, UnsupportedModeError
from .numeric import Rng, Tensor

AWGN = "awgn"
RAYLEIGH = "rayleigh"


def noise_var_from_snr(snr_db: float) -> float:
    return 10.0 ** (-snr_db / 10.0)


def snr_from_noise_var(noise_var: float) -> float:
    return -10.0 * math.log10(noise_var)


@dataclass(frozen=True)
class LinkConfig:
    """Bandwidth budget: how many complex symbols the link may carry."""

    compression_ratio: float
    source_dims: int
    csi: bool = True

    def __post_init__(self):
        if not 0.0 < self.compression_ratio <= 1.0:
            raise ConfigError(f"compression_ratio must be in (0, 1], got {self.compression_ratio}")
        if self.source_dims < 2:
            raise ConfigError(f"source_dims must be >= 2, got {self.source_dims}")

    @property
    def kept_symbols(self) -> int:
        """Complex symbols per vector: max(1, floor(ratio * dims / 2))."""
        return max(1, int(self.compression_ratio * self.source_dims / 2.0))


@dataclass(frozen=True)
class ChannelRealization:
    """One fading draw: complex gain, noise level, and the model it came from."""

    h: complex
    noise_var: float
    snr_db: float
    model: str

    @staticmethod
    def awgn(snr_db: float) -> "ChannelRealization":
        return ChannelRealization(h=1.0 + 0.0j, noise_var=noise_var_from_snr(snr_db), snr_db=snr_db, model=AWGN)


@dataclass(frozen=True)
class SymbolBlock:
    """Unit-average-power complex symbols plus the gain that restores scale."""

    symbols: np.ndarray
    gain: float

    @property
    def avg_power(self) -> float:
        return float(np.mean(np.abs(self.symbols) ** 2))


def rayleigh_draw(rng: Rng, snr_db: float) -> ChannelRealization:
    """Fresh flat-fading coefficient h ~ CN(0, 1) at the given SNR."""
    z = rng.normal(size=2)
    h = complex(z[0], z[1]) / math.sqrt(2.0)
    return ChannelRealization(h=h, noise_var=noise_var_from_snr(snr_db), snr_db=snr_db, model=RAYLEIGH)


def draw_channel(model: str, snr_db: float, rng: Rng) -> ChannelRealization:
    if model == AWGN:
        return ChannelRealization.awgn(snr_db)
    if model == RAYLEIGH:
        return rayleigh_draw(rng, snr_db)
    raise ConfigError(f"unknown channel model {model!r}")


def to_symbols(z: Tensor, link: LinkConfig) -> SymbolBlock:
    """Pack the first 2k reals of z as k unit-power complex symbols."""
    vals = z.data.reshape(-1)
    if vals.size < 2:
        raise DimensionError(f"to_symbols needs at least 2 dims, got {vals.size}")
    if vals.size != link.source_dims:
        raise DimensionError(
            f"to_symbols: vector has {vals.size} dims, link expects {link.source_dims}"
        )
    k = link.kept_symbols
    raw = vals[0 : 2 * k : 2] + 1j * vals[1 : 2 * k : 2]
    power = float(np.mean(np.abs(raw) ** 2))
    if power == 0.0:
        raise ContractError("cannot normalize an all-zero symbol vector (zero power)")
    gain = math.sqrt(power)
    return SymbolBlock(symbols=raw / gain, gain=gain)


def transmit(s: SymbolBlock, ch: ChannelRealization, rng: Rng) -> SymbolBlock:
    """y = h * s + n with n i.i.d. CN(0, noise_var)."""
    k = s.symbols.size
    std = math.sqrt(ch.noise_var / 2.0)
    noise = std * rng.normal(size=k) + 1j * (std * rng.normal(size=k))
    return SymbolBlock(symbols=ch.h * s.symbols + noise, gain=s.gain)


def equalize(y: SymbolBlock, ch: ChannelRealization, csi: bool = True) -> SymbolBlock:
    """MMSE estimate conj(h) * y / (|h|^2 + noise_var); exact inverse when
    the channel is noiseless. Requires receiver channel knowledge."""
    if not csi:
        raise UnsupportedModeError("equalization without channel knowledge is not supported")
    denom = abs(ch.h) ** 2 + ch.noise_var
    if denom == 0.0:
        raise ContractError("cannot equalize a zero channel with zero noise")
    return SymbolBlock(symbols=np.conj(ch.h) * y.symbols / denom, gain=y.gain)


def from_symbols(s: SymbolBlock, link: LinkConfig, original_d: int) -> Tensor:
    """Unpack symbols to reals, undo the power normalization, zero-fill."""
    k = link.kept_symbols
    if s.symbols.size != k:
        raise DimensionError(f"from_symbols: block has {s.symbols.size} symbols, link expects {k}")
    out = np.zeros(original_d)
    out[0 : 2 * k : 2] = s.symbols.real * s.gain
    out[1 : 2 * k : 2] = s.symbols.imag * s.gain
    return Tensor(out, copy=False)


def link_roundtrip(
    z: Tensor,
    link: LinkConfig,
    model: str,
    snr_db: float,
    rng: Rng,
    use_equalizer: bool = True,
) -> Tensor:
    """Full chain for one latent vector: pack, fade+noise, equalize, unpack.

    A fresh channel realization is drawn per call (block fading per vector).
    """
    ch = draw_channel(model, snr_db, rng)
    y = transmit(to_symbols(z, link), ch, rng)
    if use_equalizer:
        y = equalize(y, ch, csi=link.csi)
    return from_symbols(y, link, z.data.size)
