"""Edge-guided dual-decoder U-Net for sparse height-grid reconstruction.

One encoder, two cascaded decoders over four resolution levels (level 1 is
the bottleneck, level 4 the output resolution). At every level the edge
stream decodes first and its features are injected into the height stream
through a learned 1x1 alignment, so the height decoder always sees explicit
boundary features while recovering resolution:

    F_h(i) = D_h_i([F_enc(i), up(F_h(i-1)), align(F_edge(i))])

With ``inject=False`` the alignment branch is removed and the model reduces
to an ordinary dual-head U-Net (the late-branching ablation baseline).
"""

from __future__ import annotations

import torch
import torch.nn.functional as F
from torch import nn


def _norm(ch):
    return nn.GroupNorm(min(4, ch), ch)


class EncBlock(nn.Module):
    def __init__(self, cin, cout):
        super().__init__()
        self.body = nn.Sequential(
            nn.Conv2d(cin, cout, 3, padding=1), _norm(cout), nn.ReLU(inplace=True),
            nn.Conv2d(cout, cout, 3, padding=1), _norm(cout), nn.ReLU(inplace=True),
        )

    def forward(self, x):
        return self.body(x)


class DecBlock(nn.Module):
    def __init__(self, cin, cout):
        super().__init__()
        self.body = nn.Sequential(
            nn.Conv2d(cin, cout, 3, padding=1), _norm(cout), nn.ReLU(inplace=True),
        )

    def forward(self, x):
        return self.body(x)


def _up_to(x, ref):
    return F.interpolate(x, size=ref.shape[-2:], mode="bilinear",
                         align_corners=False)


class EdgeGuidedUNet(nn.Module):
    LEVELS = 4

    def __init__(self, base_channels: int = 12, in_channels: int = 2,
                 inject: bool = True):
        super().__init__()
        C = base_channels
        self.inject = inject
        # channels per level, level 4 (output res) .. level 1 (bottleneck)
        ch = {4: C, 3: 2 * C, 2: 4 * C, 1: 8 * C}
        self.ch = ch

        self.enc4 = EncBlock(in_channels, ch[4])
        self.enc3 = EncBlock(ch[4], ch[3])
        self.enc2 = EncBlock(ch[3], ch[2])
        self.enc1 = EncBlock(ch[2], ch[1])
        self.pool = nn.MaxPool2d(2, ceil_mode=True)

        self.edge_dec = nn.ModuleDict()
        self.height_dec = nn.ModuleDict()
        self.align = nn.ModuleDict()
        for i in (2, 3, 4):
            upper = ch[i - 1]
            self.edge_dec[str(i)] = DecBlock(ch[i] + upper, ch[i])
            h_in = ch[i] + upper + (ch[i] if inject else 0)
            self.height_dec[str(i)] = DecBlock(h_in, ch[i])
            if inject:
                self.align[str(i)] = nn.Conv2d(ch[i], ch[i], 1)

        self.height_head = nn.Conv2d(ch[4], 1, 1)
        self.edge_head = nn.Conv2d(ch[4], 1, 1)

    def forward(self, x):
        e4 = self.enc4(x)
        e3 = self.enc3(self.pool(e4))
        e2 = self.enc2(self.pool(e3))
        e1 = self.enc1(self.pool(e2))
        skips = {4: e4, 3: e3, 2: e2}

        f_edge = e1
        f_h = e1
        for i in (2, 3, 4):
            skip = skips[i]
            f_edge = self.edge_dec[str(i)](
                torch.cat([skip, _up_to(f_edge, skip)], dim=1))
            parts = [skip, _up_to(f_h, skip)]
            if self.inject:
                parts.append(self.align[str(i)](f_edge))
            f_h = self.height_dec[str(i)](torch.cat(parts, dim=1))
        return self.height_head(f_h), self.edge_head(f_edge)

    def parameter_count(self) -> int:
        return sum(p.numel() for p in self.parameters())


def build_net(base_channels: int = 12, inject: bool = True,
              seed: int | None = None) -> EdgeGuidedUNet:
    if seed is not None:
        torch.manual_seed(seed)
    net = EdgeGuidedUNet(base_channels=base_channels, inject=inject)
    return net
