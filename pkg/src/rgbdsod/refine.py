"""Encoder-decoder refinement over the deepest fused features.

The top fused map is first resized up to a working resolution that can
survive four stride-2 encodings (a 4x4 map cannot), then encoded into four
levels with local-context aggregation blocks after the first three, and
decoded back with skip concatenations. The decoded map at the finest level
feeds a 1x1 head whose sigmoid output is resized to the input resolution.
"""

from dataclasses import dataclass

import torch
import torch.nn as nn
import torch.nn.functional as F

from .backbone import ConvBnRelu
from .fusion import resize_to, squash

MIN_FINE_SIZE = 16


@dataclass
class FineFeatures:
    """encoded holds F1..F4 (shallow to deep), decoded holds O4..O1 in
    computation order, final is the full-resolution saliency map."""

    encoded: list
    decoded: list
    final: torch.Tensor


class FeatureAggregation(nn.Module):
    """Four parallel local-context branches fused back to the input width:
    a 1x1 projection, two dilated 3x3 convolutions and an average-pool
    branch. Spatial size is preserved."""

    def __init__(self, planes, rates=(3, 5)):
        super().__init__()
        self.branch1 = ConvBnRelu(planes, planes, kernel_size=1)
        self.branch2 = ConvBnRelu(planes, planes, kernel_size=3,
                                  dilation=rates[0])
        self.branch3 = ConvBnRelu(planes, planes, kernel_size=3,
                                  dilation=rates[1])
        self.branch4 = ConvBnRelu(planes, planes, kernel_size=1)
        self.fuse = ConvBnRelu(4 * planes, planes, kernel_size=1)

    def forward(self, x):
        pooled = F.avg_pool2d(x, kernel_size=3, stride=1, padding=1)
        outs = [self.branch1(x), self.branch2(x), self.branch3(x),
                self.branch4(pooled)]
        return self.fuse(torch.cat(outs, dim=1))


class FineRefinement(nn.Module):

    def __init__(self, in_planes, config):
        super().__init__()
        self.work_size = config.fine_size
        if self.work_size < MIN_FINE_SIZE:
            raise ValueError(
                "fine branch input size %d cannot survive 4 halvings, need "
                "at least %d" % (self.work_size, MIN_FINE_SIZE)
            )
        planes = in_planes
        self.skip = not config.ablated("SC")
        use_fa = not config.ablated("FA")
        self.de1 = ConvBnRelu(in_planes, planes, kernel_size=3, stride=2)
        self.de2 = ConvBnRelu(planes, planes, kernel_size=3, stride=2)
        self.de3 = ConvBnRelu(planes, planes, kernel_size=3, stride=2)
        self.de4 = ConvBnRelu(planes, planes, kernel_size=3, stride=2)
        self.fa1 = FeatureAggregation(planes, config.fa_rates) if use_fa else None
        self.fa2 = FeatureAggregation(planes, config.fa_rates) if use_fa else None
        self.fa3 = FeatureAggregation(planes, config.fa_rates) if use_fa else None
        merge_planes = 2 * planes if self.skip else planes
        self.up4 = ConvBnRelu(planes, planes, kernel_size=3)
        self.up3 = ConvBnRelu(merge_planes, planes, kernel_size=3)
        self.up2 = ConvBnRelu(merge_planes, planes, kernel_size=3)
        self.up1 = ConvBnRelu(merge_planes, planes, kernel_size=3)
        self.head = nn.Conv2d(planes, 1, kernel_size=1)

    def _decode(self, block, deeper, skip, out_size):
        x = torch.cat([deeper, skip], dim=1) if self.skip else deeper
        return resize_to(block(x), out_size)

    def forward(self, top_fused, full_size):
        x = resize_to(top_fused, (self.work_size, self.work_size))
        f1 = self.de1(x)
        if self.fa1 is not None:
            f1 = self.fa1(f1)
        f2 = self.de2(f1)
        if self.fa2 is not None:
            f2 = self.fa2(f2)
        f3 = self.de3(f2)
        if self.fa3 is not None:
            f3 = self.fa3(f3)
        f4 = self.de4(f3)
        o4 = self.up4(f4)
        o3 = self._decode(self.up3, o4, f4, f3.shape[-2:])
        o2 = self._decode(self.up2, o3, f3, f2.shape[-2:])
        o1 = self._decode(self.up1, o2, f2, f1.shape[-2:])
        final = resize_to(squash(self.head(o1)), full_size)
        return FineFeatures(encoded=[f1, f2, f3, f4],
                            decoded=[o4, o3, o2, o1], final=final)
