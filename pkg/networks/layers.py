"""Parameter-holding building blocks shared by the blind-spot network and PGE-Net."""
from typing import Dict, Iterator, List, Optional, Tuple

import numpy as np

from config import BSN_CONFIG
from errors import ShapeError
from tensor_core import Parameter, Tensor
from tensor_core import ops


class Module:
    """Container whose Parameters are found by walking its attributes in definition order"""

    def named_parameters(self, prefix: str = '') -> Iterator[Tuple[str, Parameter]]:
        for key, value in vars(self).items():
            name = f"{prefix}{key}"
            if isinstance(value, Parameter):
                yield name, value
            elif isinstance(value, Module):
                yield from value.named_parameters(f"{name}.")
            elif isinstance(value, (list, tuple)):
                for i, item in enumerate(value):
                    if isinstance(item, Module):
                        yield from item.named_parameters(f"{name}.{i}.")

    def parameters(self) -> List[Parameter]:
        return [p for _, p in self.named_parameters()]

    def state_dict(self) -> Dict[str, np.ndarray]:
        return {name: p.data.copy() for name, p in self.named_parameters()}

    def load_state_dict(self, state: Dict[str, np.ndarray]):
        params = dict(self.named_parameters())
        missing = sorted(set(params) - set(state))
        unexpected = sorted(set(state) - set(params))
        if missing or unexpected:
            raise ShapeError(f"checkpoint mismatch: missing {missing[:3]}, unexpected {unexpected[:3]}")
        for name, p in params.items():
            value = np.asarray(state[name], dtype=np.float64)
            if value.shape != p.shape:
                raise ShapeError(f"checkpoint tensor '{name}' has shape {value.shape}, expected {p.shape}")
            p.data[...] = value

    def __call__(self, *args, **kwargs):
        return self.forward(*args, **kwargs)


class Conv2d(Module):
    """Zero-padded 'same' convolution with an optional 0/1 tap mask; masked weights are held at 0"""

    def __init__(self, c_in: int, c_out: int, kernel_size: int = 3, dilation: int = 1,
                 mask: Optional[np.ndarray] = None, rng: Optional[np.random.Generator] = None,
                 scale: float = 1.0):
        rng = rng or np.random.default_rng(0)
        self.dilation = dilation
        self.padding = dilation * (kernel_size // 2)
        self.mask = np.ones((kernel_size, kernel_size)) if mask is None else np.asarray(mask, dtype=np.float64)
        fan_in = c_in * int(self.mask.sum())
        std = scale * np.sqrt(2.0 / max(fan_in, 1))
        weight = rng.standard_normal((c_out, c_in, kernel_size, kernel_size)) * std * self.mask
        self.weight = Parameter(weight, 'weight')
        self.bias = Parameter(np.zeros(c_out), 'bias')

    def forward(self, x) -> Tensor:
        mask = None if self.mask.all() else self.mask
        return ops.conv2d(x, self.weight, self.bias, padding=self.padding, dilation=self.dilation, mask=mask)


class PReLU(Module):
    def __init__(self, channels: int, init: float = BSN_CONFIG['prelu_init']):
        self.slope = Parameter(np.full(channels, init), 'slope')

    def forward(self, x) -> Tensor:
        return ops.prelu(x, self.slope)


class ResidualModule(Module):
    """x + Conv1x1(PReLU(Conv1x1(PReLU(x)))); displacement-neutral"""

    def __init__(self, channels: int, rng: Optional[np.random.Generator] = None, zero_last: bool = False):
        self.channels = channels
        self.act1 = PReLU(channels)
        self.conv1 = Conv2d(channels, channels, kernel_size=1, rng=rng)
        self.act2 = PReLU(channels)
        self.conv2 = Conv2d(channels, channels, kernel_size=1, rng=rng, scale=0.0 if zero_last else 1.0)

    def forward(self, x) -> Tensor:
        if x.shape[1] != self.channels:
            raise ShapeError(f"residual module built for {self.channels} channels, got {x.shape[1]}")
        return ops.add(x, self.conv2(self.act2(self.conv1(self.act1(x)))))
