"""Two-stream convolutional encoder.

Each stream extracts a seven-level pyramid. Level 1 is a stride-2 3x3 stem,
levels 2..4 are stages of residual basic blocks, levels 5..7 are single
stride-2 residual blocks. Every level halves the spatial size (ceil), and
there is no max pooling anywhere, so a 224 input yields the size ladder
[112, 56, 28, 14, 7, 4, 2].
"""

import math

import torch
import torch.nn as nn

MIN_INPUT_SIZE = 128


def conv3x3(in_planes, out_planes, stride=1, dilation=1):
    return nn.Conv2d(in_planes, out_planes, kernel_size=3, stride=stride,
                     padding=dilation, dilation=dilation, bias=False)


class ConvBnRelu(nn.Module):

    def __init__(self, in_planes, out_planes, kernel_size=3, stride=1, dilation=1):
        super().__init__()
        padding = dilation * (kernel_size - 1) // 2
        self.conv = nn.Conv2d(in_planes, out_planes, kernel_size=kernel_size,
                              stride=stride, padding=padding, dilation=dilation,
                              bias=False)
        self.bn = nn.BatchNorm2d(out_planes)
        self.relu = nn.ReLU(inplace=True)

    def forward(self, x):
        return self.relu(self.bn(self.conv(x)))


class BasicBlock(nn.Module):

    def __init__(self, in_planes, out_planes, stride=1):
        super().__init__()
        self.conv1 = conv3x3(in_planes, out_planes, stride)
        self.bn1 = nn.BatchNorm2d(out_planes)
        self.relu = nn.ReLU(inplace=True)
        self.conv2 = conv3x3(out_planes, out_planes)
        self.bn2 = nn.BatchNorm2d(out_planes)
        if stride != 1 or in_planes != out_planes:
            self.down = nn.Sequential(
                nn.Conv2d(in_planes, out_planes, kernel_size=1, stride=stride,
                          bias=False),
                nn.BatchNorm2d(out_planes),
            )
        else:
            self.down = None

    def forward(self, x):
        identity = x if self.down is None else self.down(x)
        out = self.relu(self.bn1(self.conv1(x)))
        out = self.bn2(self.conv2(out))
        return self.relu(out + identity)


class _Stem(nn.Module):

    def __init__(self, in_planes, out_planes):
        super().__init__()
        self.conv = conv3x3(in_planes, out_planes, stride=2)
        self.bn = nn.BatchNorm2d(out_planes)
        self.relu = nn.ReLU(inplace=True)

    def forward(self, x):
        return self.relu(self.bn(self.conv(x)))


class _Stage(nn.Module):

    def __init__(self, in_planes, out_planes, count):
        super().__init__()
        self.block_names = []
        planes = in_planes
        for i in range(count):
            block = BasicBlock(planes, out_planes, stride=2 if i == 0 else 1)
            name = "block%d" % (i + 1)
            setattr(self, name, block)
            self.block_names.append(name)
            planes = out_planes

    def forward(self, x):
        for name in self.block_names:
            x = getattr(self, name)(x)
        return x


class EncoderStream(nn.Module):
    """Single-modality encoder returning all seven level outputs."""

    def __init__(self, in_channels, channels, blocks=(3, 4, 6)):
        super().__init__()
        if len(channels) != 7:
            raise ValueError("channels must list 7 levels")
        self.channels = tuple(channels)
        self.level1 = _Stem(in_channels, channels[0])
        self.level2 = _Stage(channels[0], channels[1], blocks[0])
        self.level3 = _Stage(channels[1], channels[2], blocks[1])
        self.level4 = _Stage(channels[2], channels[3], blocks[2])
        self.level5 = BasicBlock(channels[3], channels[4], stride=2)
        self.level6 = BasicBlock(channels[4], channels[5], stride=2)
        self.level7 = BasicBlock(channels[5], channels[6], stride=2)

    def forward(self, x):
        maps = []
        for i in range(1, 8):
            x = getattr(self, "level%d" % i)(x)
            maps.append(x)
        return maps


def check_input(x, channels, size, label):
    if x.dim() != 4 or x.shape[1] != channels:
        raise ValueError(
            "%s input must be (B, %d, %d, %d), got %s"
            % (label, channels, size, size, tuple(x.shape))
        )
    if x.shape[2] != size or x.shape[3] != size:
        raise ValueError(
            "%s input is %dx%d but the model expects %dx%d"
            % (label, x.shape[2], x.shape[3], size, size)
        )
    if not torch.isfinite(x).all():
        raise ValueError("%s input contains non-finite values" % label)


def check_construction_size(size):
    if size < MIN_INPUT_SIZE:
        raise ValueError(
            "input_size %d is too small for 7 halving levels, need at "
            "least %d" % (size, MIN_INPUT_SIZE)
        )


class TwoStreamBackbone(nn.Module):
    """Independent rgb and depth encoders with a shared topology. The depth
    stream accepts one channel unless replicate_depth widens it to three so
    external three-channel weights can be reused."""

    def __init__(self, config):
        super().__init__()
        check_construction_size(config.input_size)
        channels = config.scaled_channels()
        self.input_size = config.input_size
        self.replicate_depth = config.replicate_depth
        depth_in = 3 if config.replicate_depth else 1
        self.rgb = EncoderStream(3, channels, config.blocks)
        self.depth = EncoderStream(depth_in, channels, config.blocks)

    def forward(self, rgb, depth):
        check_input(rgb, 3, self.input_size, "rgb")
        check_input(depth, 1, self.input_size, "depth")
        if self.replicate_depth:
            depth = depth.expand(-1, 3, -1, -1)
        return self.rgb(rgb), self.depth(depth)


def expected_pyramid_sizes(size, levels=7):
    sizes = []
    for _ in range(levels):
        size = math.ceil(size / 2)
        sizes.append(size)
    return sizes


def init_weights(module):
    if isinstance(module, nn.Conv2d):
        nn.init.kaiming_normal_(module.weight, mode="fan_out",
                                nonlinearity="relu")
        if module.bias is not None:
            nn.init.zeros_(module.bias)
    elif isinstance(module, nn.BatchNorm2d):
        nn.init.ones_(module.weight)
        nn.init.zeros_(module.bias)


def build_backbone(config):
    """Seeded constructor so two builds with the same config are bitwise
    identical."""
    torch.manual_seed(config.seed)
    backbone = TwoStreamBackbone(config)
    backbone.apply(init_weights)
    return backbone


def load_stream_weights(backbone, path, levels=(1, 2, 3, 4)):
    """Fill encoder levels from an external flat array archive whose keys
    use the canonical naming (for example rgb.level3.block1.conv2.weight).
    Returns the list of keys applied."""
    import numpy as np

    archive = np.load(path)
    state = backbone.state_dict()
    wanted = tuple("level%d." % lv for lv in levels)
    applied = []
    for key in archive.files:
        stream, _, rest = key.partition(".")
        if stream not in ("rgb", "depth") or not rest.startswith(wanted):
            continue
        if key not in state:
            raise KeyError("weight file key %r not present in backbone" % key)
        value = torch.from_numpy(np.asarray(archive[key]))
        if tuple(state[key].shape) != tuple(value.shape):
            raise ValueError(
                "shape mismatch for %s: checkpoint %s vs model %s"
                % (key, tuple(value.shape), tuple(state[key].shape))
            )
        state[key] = value.to(state[key].dtype)
        applied.append(key)
    backbone.load_state_dict(state)
    return applied
