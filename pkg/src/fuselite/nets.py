"""Network definitions: the homography regressor, the attention-gated
generator (shared encoder + gating module + U-Net merger), the conditional
patch discriminator, and the frozen perceptual feature extractor.

All forward passes are deterministic functions of (parameters, inputs);
parameters are only mutated by the optimizer between steps.  Images enter
the networks in [0, 1] without mean-centering; only the feature extractor
normalizes its input, and only when pretrained classification weights are
loaded.
"""

from __future__ import annotations

import math
import os
from pathlib import Path

import numpy as np
import torch
import torch.nn as nn

from .errors import CheckpointMismatch, ShapeMismatch, WeightsUnavailable
from .geometry import CornerOffsets
from .images import ImageBuffer, as_array

ARCH_VERSION = "fuselite-nets-1"
LEAKY_SLOPE = 0.2
NORM_EPS = 1e-5

HOMOGRAPHY_FILTERS = (64, 64, 64, 64, 128, 128, 128, 128, 256, 256, 256, 256)
DISCRIMINATOR_FILTERS = (64, 128, 256, 512, 1)

# torchvision vgg19 `features` indices of the conv layers through conv5_2
_VGG19_CONV_INDICES = (0, 2, 5, 7, 10, 12, 14, 16, 19, 21, 23, 25, 28, 30)
_VGG_MEAN = (0.485, 0.456, 0.406)
_VGG_STD = (0.229, 0.224, 0.225)


class SizeSafeInstanceNorm(nn.Module):
    """Instance norm that stays defined on 1x1 maps.

    Normalizing a single spatial element is degenerate (the limit of the
    normalization is exactly the bias), and torch refuses it outright; deep
    bottlenecks of the merger hit 1x1 on small inputs, so the limit value is
    substituted there.
    """

    def __init__(self, channels: int):
        super().__init__()
        self.norm = nn.InstanceNorm2d(channels, affine=True, eps=NORM_EPS)

    def forward(self, x):
        if x.shape[-2] * x.shape[-1] <= 1:
            return self.norm.bias.view(1, -1, 1, 1).expand_as(x) + 0.0 * x
        return self.norm(x)


def _conv_block(cin: int, cout: int) -> nn.Sequential:
    return nn.Sequential(
        nn.Conv2d(cin, cout, 3, padding=1),
        SizeSafeInstanceNorm(cout),
        nn.LeakyReLU(LEAKY_SLOPE),
    )


class HomographyNet(nn.Module):
    """Corner-offset regressor over an 8-channel input.

    Input stacks the two RGB images with both median threshold bitmaps; the
    trunk is 12 3x3 conv blocks (instance norm + leaky ReLU) with a 2x2
    stride-2 max pool after every second conv, so spatial extent falls by
    2^6; a 1024-unit hidden layer then regresses the 8 offsets linearly.
    """

    kind = "homography"

    def __init__(self, input_size: int = 256):
        super().__init__()
        if input_size % 64 != 0 or input_size < 64:
            raise ValueError("input_size must be a positive multiple of 64")
        self.input_size = input_size
        blocks = []
        cin = 8
        for i, f in enumerate(HOMOGRAPHY_FILTERS):
            blocks.append(_conv_block(cin, f))
            cin = f
            if i % 2 == 1:
                blocks.append(nn.MaxPool2d(2, 2))
        self.features = nn.Sequential(*blocks)
        feat = input_size // 64
        self.fc1 = nn.Linear(256 * feat * feat, 1024)
        self.act = nn.LeakyReLU(LEAKY_SLOPE)
        self.fc2 = nn.Linear(1024, 8)

    def config(self) -> dict:
        return {"input_size": self.input_size}

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        if x.ndim != 4 or x.shape[1] != 8:
            raise ShapeMismatch(f"expected (N, 8, H, W) input, got {tuple(x.shape)}")
        if x.shape[2] != self.input_size or x.shape[3] != self.input_size:
            raise ShapeMismatch(
                f"expected {self.input_size}x{self.input_size} input, got {tuple(x.shape[2:])}"
            )
        h = self.features(x)
        h = h.flatten(1)
        return self.fc2(self.act(self.fc1(h)))


class AttentionNet(nn.Module):
    """Shared single-layer encoder plus the gating module for the over image.

    Both images pass through one 3x3/64 conv with identical weights; the
    gate maps the concatenated features through two 3x3/64 convs (leaky
    ReLU, then sigmoid) and multiplies the over features elementwise.
    """

    kind = "attention"

    def __init__(self):
        super().__init__()
        self.encoder = nn.Conv2d(3, 64, 3, padding=1)
        self.att1 = nn.Conv2d(128, 64, 3, padding=1)
        self.att2 = nn.Conv2d(64, 64, 3, padding=1)
        self.act = nn.LeakyReLU(LEAKY_SLOPE)

    def config(self) -> dict:
        return {}

    def encode(self, img: torch.Tensor) -> torch.Tensor:
        return self.act(self.encoder(img))

    def gate(self, f1: torch.Tensor, f2: torch.Tensor) -> torch.Tensor:
        return torch.sigmoid(self.att2(self.act(self.att1(torch.cat([f1, f2], dim=1)))))

    def forward(self, i1: torch.Tensor, i2w: torch.Tensor, attention_override=None):
        """Returns (F1, F2', A2); attention_override replaces the learned gate."""
        if i1.shape != i2w.shape:
            raise ShapeMismatch(f"input shapes differ: {tuple(i1.shape)} vs {tuple(i2w.shape)}")
        f1 = self.encode(i1)
        f2 = self.encode(i2w)
        a2 = self.gate(f1, f2) if attention_override is None else attention_override
        return f1, a2 * f2, a2


class MergeNet(nn.Module):
    """U-Net merger over the concatenated feature pair.

    `depth` stride-2 4x4 convs (instance norm + leaky ReLU) halve the
    extent, mirrored by `depth` stride-2 4x4 transposed convs (instance
    norm + ReLU) with skip concatenation at matching levels; a 3x3 head
    maps to RGB through a sigmoid.  Spatial dims must divide by 2^depth.
    """

    kind = "merge"

    def __init__(self, depth: int = 7):
        super().__init__()
        if depth < 1:
            raise ValueError("depth must be >= 1")
        self.depth = depth
        downs = []
        cin = 128
        for _ in range(depth):
            downs.append(
                nn.Sequential(
                    nn.Conv2d(cin, 64, 4, stride=2, padding=1),
                    SizeSafeInstanceNorm(64),
                    nn.LeakyReLU(LEAKY_SLOPE),
                )
            )
            cin = 64
        self.downs = nn.ModuleList(downs)
        ups = []
        cin = 64
        for _ in range(depth):
            ups.append(
                nn.Sequential(
                    nn.ConvTranspose2d(cin, 64, 4, stride=2, padding=1),
                    SizeSafeInstanceNorm(64),
                    nn.ReLU(),
                )
            )
            cin = 128  # skip concatenation from the mirrored encoder level
        self.ups = nn.ModuleList(ups)
        self.head = nn.Conv2d(64, 3, 3, padding=1)

    def config(self) -> dict:
        return {"depth": self.depth}

    def forward(self, f1: torch.Tensor, f2p: torch.Tensor) -> torch.Tensor:
        if f1.shape != f2p.shape:
            raise ShapeMismatch(f"feature shapes differ: {tuple(f1.shape)} vs {tuple(f2p.shape)}")
        if f1.shape[1] != 64:
            raise ShapeMismatch(f"expected 64-channel features, got {f1.shape[1]}")
        divisor = 1 << self.depth
        if f1.shape[2] % divisor or f1.shape[3] % divisor:
            raise ShapeMismatch(
                f"spatial dims {tuple(f1.shape[2:])} not divisible by {divisor}"
            )
        x = torch.cat([f1, f2p], dim=1)
        skips = []
        for down in self.downs:
            x = down(x)
            skips.append(x)
        x = self.ups[0](x)
        for up, skip in zip(self.ups[1:], reversed(skips[:-1])):
            x = up(torch.cat([x, skip], dim=1))
        return torch.sigmoid(self.head(x))


class PatchDiscriminator(nn.Module):
    """Conditional patch critic over (under, warped over, candidate).

    Five 4x4 convs with filters 64/128/256/512/1; the first four use stride
    2 and leaky ReLU, the middle three instance norm; the final stride-1
    conv is linear (least-squares objective, no sigmoid) and emits one
    score per receptive-field patch.
    """

    kind = "discriminator"

    def __init__(self):
        super().__init__()
        self.stages = nn.Sequential(
            nn.Conv2d(9, 64, 4, stride=2, padding=1),
            nn.LeakyReLU(LEAKY_SLOPE),
            nn.Conv2d(64, 128, 4, stride=2, padding=1),
            SizeSafeInstanceNorm(128),
            nn.LeakyReLU(LEAKY_SLOPE),
            nn.Conv2d(128, 256, 4, stride=2, padding=1),
            SizeSafeInstanceNorm(256),
            nn.LeakyReLU(LEAKY_SLOPE),
            nn.Conv2d(256, 512, 4, stride=2, padding=1),
            SizeSafeInstanceNorm(512),
            nn.LeakyReLU(LEAKY_SLOPE),
            nn.Conv2d(512, 1, 4, stride=1, padding="same"),
        )

    def config(self) -> dict:
        return {}

    def forward(self, i1: torch.Tensor, i2w: torch.Tensor, x: torch.Tensor) -> torch.Tensor:
        if not (i1.shape == i2w.shape == x.shape):
            raise ShapeMismatch("conditioning images and candidate must share dims")
        return self.stages(torch.cat([i1, i2w, x], dim=1))


class FeatureExtractor(nn.Module):
    """Frozen VGG-19-shaped feature taps for the perceptual loss.

    Emits six maps per image: the raw input plus the (post-activation)
    second conv of each of the five blocks.  Weights come either from a
    user-supplied pretrained file or from a seeded random draw; both stay
    frozen.  Input normalization is applied only in pretrained mode, and
    never to the raw-input tap.
    """

    kind = "feature_extractor"
    TAP_CHANNELS = (3, 64, 128, 256, 512, 512)

    def __init__(self, normalize_input: bool = False):
        super().__init__()
        r = nn.ReLU
        c = lambda cin, cout: nn.Conv2d(cin, cout, 3, padding=1)
        m = lambda: nn.MaxPool2d(2, 2)
        self.stage1 = nn.Sequential(c(3, 64), r(), c(64, 64), r())
        self.stage2 = nn.Sequential(m(), c(64, 128), r(), c(128, 128), r())
        self.stage3 = nn.Sequential(m(), c(128, 256), r(), c(256, 256), r())
        self.stage4 = nn.Sequential(c(256, 256), r(), c(256, 256), r(), m(), c(256, 512), r(), c(512, 512), r())
        self.stage5 = nn.Sequential(c(512, 512), r(), c(512, 512), r(), m(), c(512, 512), r(), c(512, 512), r())
        self.normalize_input = normalize_input
        self.register_buffer("mean", torch.tensor(_VGG_MEAN).view(1, 3, 1, 1))
        self.register_buffer("std", torch.tensor(_VGG_STD).view(1, 3, 1, 1))
        for p in self.parameters():
            p.requires_grad_(False)

    def config(self) -> dict:
        return {"normalize_input": self.normalize_input}

    def _ordered_convs(self) -> list[nn.Conv2d]:
        convs = []
        for stage in (self.stage1, self.stage2, self.stage3, self.stage4, self.stage5):
            convs.extend(mod for mod in stage if isinstance(mod, nn.Conv2d))
        return convs

    def load_pretrained(self, path) -> None:
        """Load VGG-19 classification weights (torchvision layout) from a file."""
        path = Path(path)
        if not path.exists():
            raise WeightsUnavailable(f"pretrained weights not found: {path}")
        state = torch.load(os.fspath(path), map_location="cpu", weights_only=True)
        if hasattr(state, "state_dict"):
            state = state.state_dict()
        convs = self._ordered_convs()
        for conv, idx in zip(convs, _VGG19_CONV_INDICES):
            for part in ("weight", "bias"):
                for key in (f"features.{idx}.{part}", f"{idx}.{part}"):
                    if key in state:
                        tensor = state[key]
                        break
                else:
                    raise WeightsUnavailable(f"missing tensor for conv {idx} in {path}")
                if tensor.shape != getattr(conv, part).shape:
                    raise CheckpointMismatch(
                        f"pretrained tensor {key} has shape {tuple(tensor.shape)}, "
                        f"expected {tuple(getattr(conv, part).shape)}"
                    )
                getattr(conv, part).data.copy_(tensor)
        self.normalize_input = True

    def forward(self, img: torch.Tensor) -> list[torch.Tensor]:
        if img.ndim != 4 or img.shape[1] != 3:
            raise ShapeMismatch(f"expected (N, 3, H, W) image, got {tuple(img.shape)}")
        taps = [img]
        x = img
        if self.normalize_input:
            x = (x - self.mean.to(x.dtype)) / self.std.to(x.dtype)
        for stage in (self.stage1, self.stage2, self.stage3, self.stage4, self.stage5):
            x = stage(x)
            taps.append(x)
        return taps


NETWORK_KINDS = {
    "homography": HomographyNet,
    "attention": AttentionNet,
    "merge": MergeNet,
    "discriminator": PatchDiscriminator,
    "feature_extractor": FeatureExtractor,
}


def _fan_in(module: nn.Module) -> int:
    if isinstance(module, (nn.Conv2d, nn.ConvTranspose2d)):
        return module.in_channels * module.kernel_size[0] * module.kernel_size[1]
    if isinstance(module, nn.Linear):
        return module.in_features
    raise TypeError(type(module))


def seeded_init(net: nn.Module, seed: int) -> nn.Module:
    """Fan-in-scaled normal init for convs/dense, identity affine for norms."""
    gen = torch.Generator().manual_seed(int(seed))
    for module in net.modules():
        if isinstance(module, (nn.Conv2d, nn.ConvTranspose2d, nn.Linear)):
            std = math.sqrt(2.0 / _fan_in(module))
            module.weight.data.normal_(0.0, std, generator=gen)
            if module.bias is not None:
                module.bias.data.zero_()
        elif isinstance(module, nn.InstanceNorm2d) and module.affine:
            module.weight.data.fill_(1.0)
            module.bias.data.zero_()
    return net


def init_params(kind: str, seed: int = 0, **kwargs) -> nn.Module:
    """Build a network of the given kind with deterministic seeded weights."""
    if kind not in NETWORK_KINDS:
        raise ValueError(f"unknown network kind {kind!r}")
    weights = kwargs.pop("weights", None)
    net = NETWORK_KINDS[kind](**kwargs)
    seeded_init(net, seed)
    if kind == "feature_extractor":
        if weights is not None:
            net.load_pretrained(weights)
        for p in net.parameters():
            p.requires_grad_(False)
    return net


def save_net(path, net: nn.Module) -> None:
    """Write one archive: named tensors + shape manifest + version string."""
    state = net.state_dict()
    payload = {
        "kind": net.kind,
        "arch_version": ARCH_VERSION,
        "config": net.config(),
        "shapes": {k: list(v.shape) for k, v in state.items()},
        "state": state,
    }
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    torch.save(payload, os.fspath(path))


def load_net(path, expected_kind: str | None = None) -> nn.Module:
    """Rebuild a network from an archive; refuse shape/version mismatches."""
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"checkpoint not found: {path}")
    payload = torch.load(os.fspath(path), map_location="cpu", weights_only=False)
    if payload.get("arch_version") != ARCH_VERSION:
        raise CheckpointMismatch(
            f"architecture version {payload.get('arch_version')!r} != {ARCH_VERSION!r}"
        )
    kind = payload["kind"]
    if expected_kind is not None and kind != expected_kind:
        raise CheckpointMismatch(f"checkpoint holds {kind!r}, expected {expected_kind!r}")
    net = NETWORK_KINDS[kind](**payload["config"])
    expected_shapes = {k: list(v.shape) for k, v in net.state_dict().items()}
    if payload["shapes"] != expected_shapes:
        raise CheckpointMismatch("tensor shape manifest does not match the architecture")
    net.load_state_dict(payload["state"])
    if kind == "feature_extractor":
        for p in net.parameters():
            p.requires_grad_(False)
    return net


def to_tensor(img, dtype=torch.float32) -> torch.Tensor:
    """(H, W, 3) or (H, W) array / ImageBuffer -> (1, C, H, W) tensor."""
    data = as_array(img)
    if data.ndim == 2:
        data = data[:, :, None]
    arr = np.ascontiguousarray(np.transpose(data, (2, 0, 1)))[None]
    return torch.from_numpy(arr).to(dtype)


def from_tensor(t: torch.Tensor) -> np.ndarray:
    """(1, 3, H, W) tensor -> (H, W, 3) float32 array clipped to [0, 1]."""
    arr = t.detach().cpu().numpy()[0].transpose(1, 2, 0)
    return np.clip(arr, 0.0, 1.0).astype(np.float32)


def homography_forward(net: HomographyNet, under, over, mtb_under, mtb_over) -> CornerOffsets:
    """Predict the corner offsets that warp `over` onto `under`'s frame."""
    x = torch.cat(
        [
            to_tensor(under),
            to_tensor(over),
            to_tensor(np.asarray(mtb_under, dtype=np.float32)),
            to_tensor(np.asarray(mtb_over, dtype=np.float32)),
        ],
        dim=1,
    )
    with torch.no_grad():
        vec = net(x)[0].cpu().numpy().astype(np.float64)
    return CornerOffsets.from_vector(vec, (net.input_size, net.input_size))
