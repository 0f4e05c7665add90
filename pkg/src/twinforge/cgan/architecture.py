"""Layer hyperparameters for the generator and discriminator presets.

Only lengths, widths, strides and padding/cropping are fixed by hand; filter
lengths are solved from the length recurrences so that every preset closes
exactly on its target signal length.
"""

from __future__ import annotations

from dataclasses import dataclass


class ArchitectureError(ValueError):
    pass


def tconv_filter(s_in: int, s_out: int, stride: int, crop_total: int) -> int:
    """Filter length giving ``(s_in - 1) * stride + f - crop_total == s_out``."""
    f = s_out - (s_in - 1) * stride + crop_total
    if f < 1:
        raise ArchitectureError(f"tconv {s_in}->{s_out} (stride {stride}, crop {crop_total}) has no solution")
    return f


def conv_filter(s_in: int, s_out: int, stride: int, padding: int) -> int:
    """Largest filter length giving ``(s_in + 2p - f) // stride + 1 == s_out``."""
    f = s_in + 2 * padding - stride * (s_out - 1)
    if f < 1 or f > s_in + 2 * padding:
        raise ArchitectureError(f"conv {s_in}->{s_out} (stride {stride}, pad {padding}) has no solution")
    return f


def split_crop(total: int, lead_first: bool) -> tuple[int, int]:
    # odd totals put the extra sample at the trailing edge
    lead = total // 2
    return (lead, total - lead) if lead_first else (total - lead, lead)


@dataclass(frozen=True)
class Preset:
    name: str
    signal_length: int
    proj_channels: int
    g_lengths: tuple  # proj length, then each tconv output
    g_channels: tuple  # tconv1..tconv4 outputs (tconv5 emits 1)
    g_strides: tuple
    g_crops: tuple  # total cropping per tconv
    d_lengths: tuple  # input, then each conv output
    d_channels: tuple  # conv1..conv4 outputs (conv5 emits 1)
    d_strides: tuple
    d_paddings: tuple
    embed_dim: int = 100

    def __post_init__(self):
        if self.g_lengths[-1] != self.signal_length or self.d_lengths[0] != self.signal_length:
            raise ArchitectureError(f"{self.name}: length ladders do not start/end at {self.signal_length}")
        if self.d_lengths[-1] != 1:
            raise ArchitectureError(f"{self.name}: discriminator must end at length 1")
        if not (len(self.g_strides) == len(self.g_crops) == len(self.g_lengths) - 1 == len(self.g_channels) + 1):
            raise ArchitectureError(f"{self.name}: generator ladder sizes disagree")
        if not (len(self.d_strides) == len(self.d_paddings) == len(self.d_lengths) - 1 == len(self.d_channels) + 1):
            raise ArchitectureError(f"{self.name}: discriminator ladder sizes disagree")

    @property
    def g_filters(self) -> tuple:
        L = self.g_lengths
        return tuple(
            tconv_filter(L[i], L[i + 1], self.g_strides[i], self.g_crops[i]) for i in range(len(self.g_strides))
        )

    @property
    def d_filters(self) -> tuple:
        L = self.d_lengths
        return tuple(
            conv_filter(L[i], L[i + 1], self.d_strides[i], self.d_paddings[i]) for i in range(len(self.d_strides))
        )

    @property
    def g_croppings(self) -> tuple:
        return tuple(split_crop(c, lead_first=True) for c in self.g_crops)


PAPER = Preset(
    name="paper",
    signal_length=1201,
    proj_channels=1024,
    g_lengths=(4, 8, 36, 150, 599, 1201),
    g_channels=(512, 256, 128, 64),
    g_strides=(2, 4, 4, 4, 2),
    g_crops=(3, 2, 2, 2, 2),
    d_lengths=(1201, 594, 146, 34, 8, 1),
    d_channels=(512, 256, 128, 64),
    d_strides=(2, 4, 4, 4, 1),
    d_paddings=(1, 1, 1, 1, 0),
)

# widths / 8, length 301; same layer topology
DESK = Preset(
    name="desk",
    signal_length=301,
    proj_channels=128,
    g_lengths=(4, 8, 18, 38, 150, 301),
    g_channels=(64, 32, 16, 8),
    g_strides=(2, 2, 2, 4, 2),
    g_crops=(3, 2, 2, 2, 2),
    d_lengths=(301, 75, 18, 8, 4, 1),
    d_channels=(64, 32, 16, 8),
    d_strides=(4, 4, 2, 2, 1),
    d_paddings=(1, 1, 1, 1, 0),
)

PRESETS = {"paper": PAPER, "desk": DESK}


def get_preset(name: str) -> Preset:
    try:
        return PRESETS[name]
    except KeyError:
        raise ArchitectureError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}") from None
