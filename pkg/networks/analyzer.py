"""Symbolic receptive-field analysis of masked-convolution stacks.

The set of input offsets that can influence one output pixel is
propagated through the layer DAG on a boolean grid: a spatial layer
takes the Minkowski sum with its taps, 1x1 convolutions and activations
leave it unchanged, and a residual edge takes the union of both inputs.
A network is blind-spot safe iff (0, 0) is not in the final set.
"""
import logging
from typing import Dict, FrozenSet, List, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict

from errors import BlindSpotViolation
from networks.net_config import HEAD, NetConfig, Tap

logger = logging.getLogger(__name__)


class DisplacementSet(BaseModel):
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    offsets: FrozenSet[Tap]

    def __contains__(self, offset) -> bool:
        return tuple(offset) in self.offsets

    def __len__(self) -> int:
        return len(self.offsets)

    @property
    def blind_spot(self) -> bool:
        return (0, 0) not in self.offsets

    def receptive_field(self) -> Tuple[int, int]:
        if not self.offsets:
            return 0, 0
        dys = [dy for dy, _ in self.offsets]
        dxs = [dx for _, dx in self.offsets]
        return max(dys) - min(dys) + 1, max(dxs) - min(dxs) + 1


class _Propagation:
    """Per-node grids: `conv[k]` is what layer k's convolution sees, `total[k]` adds residual inputs"""

    def __init__(self, cfg: NetConfig):
        cfg.check_structure()
        self.cfg = cfg
        self.radius = sum(layer.radius for layer in cfg.layers)
        size = 2 * self.radius + 1
        origin = np.zeros((size, size), dtype=bool)
        origin[self.radius, self.radius] = True

        self.head = cfg.depth + 1
        self.incoming: Dict[int, List[int]] = {}
        for edge in cfg.residuals:
            dst = self.head if edge.dst == HEAD else edge.dst
            self.incoming.setdefault(dst, []).append(edge.src)

        self.conv: Dict[int, np.ndarray] = {}
        self.total: Dict[int, np.ndarray] = {0: origin}
        for k, layer in enumerate(cfg.layers, start=1):
            self.conv[k] = self._minkowski(self.total[k - 1], layer.taps)
            self.total[k] = self._join(k, self.conv[k])
        self.conv[self.head] = self.total[cfg.depth]
        self.total[self.head] = self._join(self.head, self.conv[self.head])

    @staticmethod
    def _minkowski(grid: np.ndarray, taps) -> np.ndarray:
        out = np.zeros_like(grid)
        for dy, dx in taps:
            out |= np.roll(grid, (dy, dx), axis=(0, 1))
        return out

    def _join(self, node: int, grid: np.ndarray) -> np.ndarray:
        out = grid.copy()
        for src in self.incoming.get(node, ()):
            out |= self.total[src]
        return out

    def has(self, grid: np.ndarray, offset: Tap) -> bool:
        i, j = offset[0] + self.radius, offset[1] + self.radius
        return 0 <= i < grid.shape[0] and 0 <= j < grid.shape[1] and bool(grid[i, j])

    def offsets(self, node: int) -> FrozenSet[Tap]:
        rows, cols = np.nonzero(self.total[node])
        return frozenset((int(r) - self.radius, int(c) - self.radius) for r, c in zip(rows, cols))

    def witness(self, target: Tap = (0, 0)) -> List[Tap]:
        """Nonzero taps, input side first, of one path from the input to `target` at the output"""
        path = []
        node = self.head
        while node > 0:
            if node != self.head and self.has(self.conv[node], target):
                layer = self.cfg.layers[node - 1]
                ordered = sorted(layer.taps, key=lambda t: (t != (0, 0), abs(t[1]), t[0], t[1]))
                for tap in ordered:
                    rest = (target[0] - tap[0], target[1] - tap[1])
                    if self.has(self.total[node - 1], rest):
                        if tap != (0, 0):
                            path.append(tap)
                        target = rest
                        break
                node -= 1
            elif node == self.head and self.has(self.conv[node], target):
                node = self.cfg.depth
            else:
                node = next(src for src in self.incoming[node] if self.has(self.total[src], target))
        return list(reversed(path))


def displacement_set(cfg: NetConfig) -> DisplacementSet:
    return _displacement(_Propagation(cfg))


def _displacement(prop: _Propagation) -> DisplacementSet:
    return DisplacementSet(offsets=prop.offsets(prop.head))


def receptive_field(cfg: NetConfig) -> Tuple[int, int]:
    return displacement_set(cfg).receptive_field()


def format_path(path: List[Tap]) -> str:
    return '+'.join(f"({dy},{dx})" for dy, dx in path)


def verify_blind_spot(cfg: NetConfig) -> DisplacementSet:
    """Displacement set of `cfg`, or BlindSpotViolation naming a zero-sum tap path"""
    prop = _Propagation(cfg)
    result = _displacement(prop)
    if not result.blind_spot:
        path = prop.witness()
        raise BlindSpotViolation(
            f"blind-spot violation in '{cfg.name}': (0,0) reachable via {format_path(path) or 'the identity'}",
            path=path)
    return result


def count_parameters(cfg: NetConfig) -> int:
    """Scalar parameters of the built network; masked weights are not counted"""
    total = 0
    for layer in cfg.layers:
        c_in, c_out = layer.in_channels, layer.out_channels
        total += len(layer.taps) * c_in * c_out + c_out
        if layer.has_prelu:
            total += c_out
        if layer.residual_module:
            total += 2 * (c_out * c_out + c_out) + 2 * c_out
    previous = cfg.layers[-1].out_channels if cfg.layers else 0
    for k, width in enumerate(cfg.head):
        total += previous * width + width
        if k < len(cfg.head) - 1:
            total += width
        previous = width
    return total


def describe(cfg: NetConfig) -> dict:
    """Summary used by the analyze-net command"""
    prop = _Propagation(cfg)
    result = _displacement(prop)
    rf = result.receptive_field()
    summary = {
        'name': cfg.name,
        'layers': cfg.depth,
        'offsets': len(result),
        'receptive_field': rf,
        'parameters': count_parameters(cfg),
        'blind_spot': result.blind_spot,
        'path': [] if result.blind_spot else prop.witness(),
    }
    logger.info(f"{cfg.name}: {cfg.depth} layers, RF {rf[0]}x{rf[1]}, "
                f"{summary['parameters']} parameters, blind spot {'holds' if result.blind_spot else 'violated'}")
    return summary
