import numpy as np
import pytest
import torch

from unet_post.config import UNetConfig
from unet_post.model import ResidualUNet, build_unet, count_parameters


def expected_params(dims: int, depth: int, base: int) -> int:
    """Closed-form count for the architecture, derived independently."""
    k = 9 if dims == 2 else 27
    chans = [base * 2 ** i for i in range(depth)]
    total = 0
    c_prev = 1
    for c in chans:
        total += k * c_prev * c + c + k * c * c + c
        c_prev = c
    for c in reversed(chans[:-1]):
        # 1x1 halving conv, then two convs on the concatenated features
        total += 2 * c * c + c
        total += k * 2 * c * c + c + k * c * c + c
    total += chans[0] + 1
    return total


class TestParameterCount:
    @pytest.mark.parametrize("dims,base", [(2, 8), (2, 12), (3, 4), (3, 6)])
    def test_matches_closed_form(self, dims, base):
        model, n = build_unet(UNetConfig(dims=dims, base_filters=base))
        assert n == expected_params(dims, 5, base)
        assert n == count_parameters(model)

    def test_depth_changes_count(self):
        _, n3 = build_unet(UNetConfig(dims=2, depth=3, base_filters=8))
        _, n5 = build_unet(UNetConfig(dims=2, depth=5, base_filters=8))
        assert n3 == expected_params(2, 3, 8)
        assert n5 > n3


class TestResidualIdentity:
    def test_fresh_model_is_identity_2d(self):
        torch.manual_seed(3)
        model, _ = build_unet(UNetConfig(dims=2, base_filters=4))
        x = torch.randn(2, 1, 32, 48)
        with torch.no_grad():
            y = model(x)
        assert torch.equal(y, x)

    def test_fresh_model_is_identity_3d(self):
        torch.manual_seed(4)
        model, _ = build_unet(UNetConfig(dims=3, base_filters=2))
        x = torch.randn(1, 1, 16, 16, 32)
        with torch.no_grad():
            y = model(x)
        assert torch.equal(y, x)

    def test_one_step_moves_off_identity(self):
        torch.manual_seed(5)
        model, _ = build_unet(UNetConfig(dims=2, base_filters=4))
        x = torch.randn(1, 1, 16, 16)
        target = x + 0.5
        opt = torch.optim.Adam(model.parameters(), lr=1e-3)
        loss = (model(x) - target).abs().mean()
        loss.backward()
        opt.step()
        with torch.no_grad():
            assert not torch.equal(model(x), x)


class TestForward:
    def test_output_shape_2d(self):
        model, _ = build_unet(UNetConfig(dims=2, base_filters=4))
        x = torch.randn(3, 1, 16, 64)
        assert model(x).shape == x.shape

    def test_output_shape_3d(self):
        model, _ = build_unet(UNetConfig(dims=3, base_filters=2))
        x = torch.randn(1, 1, 16, 32, 16)
        assert model(x).shape == x.shape

    def test_rejects_indivisible_spatial_dims(self):
        model, _ = build_unet(UNetConfig(dims=2, base_filters=4))
        with pytest.raises(ValueError, match="multiples of 16"):
            model(torch.randn(1, 1, 20, 32))

    def test_spatial_multiple(self):
        m5, _ = build_unet(UNetConfig(dims=2, base_filters=4))
        m3, _ = build_unet(UNetConfig(dims=2, depth=3, base_filters=4))
        assert m5.spatial_multiple == 16
        assert m3.spatial_multiple == 4

    def test_shallow_model_accepts_smaller_dims(self):
        model, _ = build_unet(UNetConfig(dims=2, depth=3, base_filters=4))
        x = torch.randn(1, 1, 12, 20)
        assert model(x).shape == x.shape


class TestConfig:
    def test_defaults(self):
        cfg = UNetConfig()
        assert cfg.dims == 2 and cfg.depth == 5
        assert cfg.base_filters == 64 and cfg.leaky_slope == 0.3

    @pytest.mark.parametrize("kw", [
        {"dims": 4}, {"dims": 1}, {"depth": 1}, {"base_filters": 0},
        {"leaky_slope": 0.0}, {"leaky_slope": 1.0}, {"leaky_slope": -0.1},
    ])
    def test_rejects_bad_values(self, kw):
        with pytest.raises(ValueError):
            UNetConfig(**kw)

    def test_dict_round_trip(self):
        cfg = UNetConfig(dims=3, depth=4, base_filters=12, leaky_slope=0.2)
        assert UNetConfig.from_dict(cfg.to_dict()) == cfg
