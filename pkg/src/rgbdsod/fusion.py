"""Top-down cross-modal fusion chain with side supervision heads.

One fusion step takes the rgb and depth features of its own level plus the
level above. Branch A merges the same-level pair and spreads context with
dilated parallel convolutions. Branch B gates the upper-level pair with
channel then spatial attention and is resized up to the step resolution.
The step output concatenates (A + B) with the resized previous step output,
so fused widths grow as the chain walks down the pyramid.
"""

import torch
import torch.nn as nn
import torch.nn.functional as F

from .backbone import ConvBnRelu

NUM_LEVELS = 6
SIGMOID_EPS = 1.0e-7


def squash(logits):
    """Sigmoid kept away from exact 0 and 1, which float32 saturation would
    otherwise produce for logits beyond roughly +-17."""
    return torch.sigmoid(logits).clamp(SIGMOID_EPS, 1.0 - SIGMOID_EPS)


def resize_to(x, size):
    if x.shape[-2:] == tuple(size):
        return x
    return F.interpolate(x, size=size, mode="bilinear", align_corners=False)


class Aspp(nn.Module):
    """Parallel dilated 3x3 convolutions (rate 1 degenerates to 1x1),
    concatenated and fused back to the input plane count."""

    def __init__(self, planes, rates=(1, 6, 12, 18)):
        super().__init__()
        self.rates = tuple(rates)
        self.branch_names = []
        for i, rate in enumerate(self.rates):
            if rate == 1:
                branch = ConvBnRelu(planes, planes, kernel_size=1)
            else:
                branch = ConvBnRelu(planes, planes, kernel_size=3, dilation=rate)
            name = "branch%d" % (i + 1)
            setattr(self, name, branch)
            self.branch_names.append(name)
        self.fuse = ConvBnRelu(planes * len(self.rates), planes, kernel_size=1)

    def forward(self, x):
        outs = [getattr(self, name)(x) for name in self.branch_names]
        return self.fuse(torch.cat(outs, dim=1))


class ChannelAttention(nn.Module):
    """Global spatial max pooling into a per-plane gate in [0, 1]. The
    pooled map is 1x1, so batch statistics are the only averaging axis and
    training needs a batch of at least 2."""

    def __init__(self, planes):
        super().__init__()
        self.conv = nn.Conv2d(planes, planes, kernel_size=1, bias=False)
        self.bn = nn.BatchNorm2d(planes)
        self.relu = nn.ReLU(inplace=True)
        self.sigmoid = nn.Sigmoid()

    def gate(self, x):
        pooled = F.adaptive_max_pool2d(x, 1)
        return self.sigmoid(self.relu(self.bn(self.conv(pooled))))

    def forward(self, x):
        return x * self.gate(x)


class SpatialAttention(nn.Module):
    """Plane-wise mean pooling to a single plane, then a 7x7 convolution
    and a sigmoid gate applied to every plane. literal_pool switches to the
    global-average-pooling form, which collapses the gate to one value per
    plane instead of one per pixel."""

    def __init__(self, planes, literal_pool=False):
        super().__init__()
        self.literal_pool = literal_pool
        if literal_pool:
            self.conv = nn.Conv2d(planes, planes, kernel_size=7, padding=3)
        else:
            self.conv = nn.Conv2d(1, 1, kernel_size=7, padding=3)
        self.sigmoid = nn.Sigmoid()

    def gate(self, x):
        if self.literal_pool:
            pooled = F.adaptive_avg_pool2d(x, 1)
        else:
            pooled = x.mean(dim=1, keepdim=True)
        return self.sigmoid(self.conv(pooled))

    def forward(self, x):
        return x * self.gate(x)


class FusionStep(nn.Module):
    """One step of the top-down chain. out_planes reports the fused width
    so the next step and the saliency head can size themselves."""

    def __init__(self, level_planes, upper_planes, prev_planes, config,
                 with_head=True):
        super().__init__()
        c = level_planes
        self.merge = ConvBnRelu(2 * level_planes, c, kernel_size=3)
        if config.ablated("ASPP"):
            self.aspp = ConvBnRelu(c, c, kernel_size=3)
        else:
            self.aspp = Aspp(c, config.aspp_rates)
        self.channel_att = None if config.ablated("CA") else ChannelAttention(
            2 * upper_planes)
        self.spatial_att = None if config.ablated("SA") else SpatialAttention(
            2 * upper_planes, literal_pool=config.literal_spatial_pool)
        self.reduce = ConvBnRelu(2 * upper_planes, c, kernel_size=1)
        self.out_planes = c + prev_planes
        if with_head:
            self.head = nn.Conv2d(self.out_planes, 1, kernel_size=3, padding=1)
        else:
            self.head = None

    def forward(self, f_rgb, f_dep, up_rgb, up_dep, prev, full_size):
        size = f_rgb.shape[-2:]
        a = self.aspp(self.merge(torch.cat([f_rgb, f_dep], dim=1)))
        b = torch.cat([up_rgb, up_dep], dim=1)
        if self.channel_att is not None:
            b = self.channel_att(b)
        if self.spatial_att is not None:
            b = self.spatial_att(b)
        b = resize_to(self.reduce(b), size)
        fused = a + b
        if prev is not None:
            fused = torch.cat([fused, resize_to(prev, size)], dim=1)
        saliency = None
        if self.head is not None:
            saliency = squash(resize_to(self.head(fused), full_size))
        return fused, saliency


class CoarseRefinement(nn.Module):
    """Chain of fusion steps from the deepest level downward. With k steps
    the computed levels are 6, 5, ..., 7-k; outputs are returned in
    ascending level order, so index -1 is always level 6."""

    def __init__(self, channels, config):
        super().__init__()
        self.steps = config.refine_steps
        self.levels = list(range(NUM_LEVELS, NUM_LEVELS - self.steps, -1))
        with_head = not config.ablated("CR")
        prev_planes = 0
        for level in self.levels:
            step = FusionStep(
                level_planes=channels[level - 1],
                upper_planes=channels[level],
                prev_planes=prev_planes,
                config=config,
                with_head=with_head,
            )
            setattr(self, "level%d" % level, step)
            prev_planes = step.out_planes
        self.top_planes = getattr(self, "level%d" % NUM_LEVELS).out_planes

    def forward(self, rgb_maps, dep_maps, full_size):
        fused_by_level = {}
        saliency_by_level = {}
        prev = None
        for level in self.levels:
            step = getattr(self, "level%d" % level)
            fused, saliency = step(
                rgb_maps[level - 1], dep_maps[level - 1],
                rgb_maps[level], dep_maps[level],
                prev, full_size,
            )
            fused_by_level[level] = fused
            saliency_by_level[level] = saliency
            prev = fused
        ascending = sorted(fused_by_level)
        fused_list = [fused_by_level[lv] for lv in ascending]
        saliency_list = [saliency_by_level[lv] for lv in ascending
                         if saliency_by_level[lv] is not None]
        return fused_list, saliency_list
