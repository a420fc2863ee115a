"""Assembled saliency network: two-stream encoder, top-down fusion chain
and the fine refinement branch."""

from dataclasses import dataclass, field
from typing import Optional

import torch
import torch.nn as nn

from .backbone import (EncoderStream, check_construction_size, check_input,
                       init_weights)
from .config import ModelConfig
from .fusion import CoarseRefinement
from .refine import FineRefinement


@dataclass
class SaliencyPrediction:
    """coarse holds the side-output maps in ascending level order (so the
    deepest level sits at index -1) and is empty when coarse supervision is
    ablated. fine is None when the fine branch is ablated; the deepest
    side output then serves as the final map."""

    coarse: list = field(default_factory=list)
    fine: Optional[torch.Tensor] = None
    levels: tuple = ()

    @property
    def final(self):
        if self.fine is not None:
            return self.fine
        if not self.coarse:
            raise ValueError("prediction holds no maps")
        return self.coarse[-1]

    def all_maps(self):
        maps = list(self.coarse)
        if self.fine is not None:
            maps.append(self.fine)
        return maps


class RgbdSaliencyModel(nn.Module):

    def __init__(self, config: ModelConfig):
        super().__init__()
        config.validate()
        check_construction_size(config.input_size)
        self.config = config
        channels = config.scaled_channels()
        depth_in = 3 if config.replicate_depth else 1
        self.rgb = EncoderStream(3, channels, config.blocks)
        self.depth = EncoderStream(depth_in, channels, config.blocks)
        self.abf = CoarseRefinement(channels, config)
        if config.ablated("FR"):
            self.fine = None
        else:
            self.fine = FineRefinement(self.abf.top_planes, config)

    def forward(self, rgb, depth) -> SaliencyPrediction:
        size = self.config.input_size
        check_input(rgb, 3, size, "rgb")
        check_input(depth, 1, size, "depth")
        if self.config.replicate_depth:
            depth = depth.expand(-1, 3, -1, -1)
        rgb_maps = self.rgb(rgb)
        dep_maps = self.depth(depth)
        fused, coarse = self.abf(rgb_maps, dep_maps, (size, size))
        fine = None
        if self.fine is not None:
            fine = self.fine(fused[-1], (size, size)).final
        return SaliencyPrediction(
            coarse=coarse,
            fine=fine,
            levels=tuple(sorted(self.abf.levels)),
        )


def build_model(config: ModelConfig) -> RgbdSaliencyModel:
    """Seeded build; identical configs produce bitwise-identical weights."""
    torch.manual_seed(config.seed)
    model = RgbdSaliencyModel(config)
    model.apply(init_weights)
    return model


def count_parameters(model):
    return sum(p.numel() for p in model.parameters() if p.requires_grad)
