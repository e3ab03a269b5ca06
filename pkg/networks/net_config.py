"""Symbolic description of masked-convolution stacks and its plain-text format.

One directive per line; `#` starts a comment:

    name fbi-safe-17
    width 32
    layer grid=3 dilation=1 center=0 in=1 out=32 prelu=1 rm=0
    layer taps=-2:0,2:0,0:-2,0:2 kernel=5 in=32 out=32 prelu=1 rm=1
    residual inner 1 9
    residual outer 1 head
    head 32 2

Layers are numbered from 1; index 0 is the network input. A `grid`
layer expands to the taps {-g//2..g//2}² scaled by `dilation`, without
(0,0) when `center=0`.
"""
from math import gcd
from typing import List, Optional, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict

from config import BSN_CONFIG
from errors import NetConfigError

Tap = Tuple[int, int]
HEAD = 'head'


class LayerSpec(BaseModel):
    model_config = ConfigDict(frozen=True)

    taps: Tuple[Tap, ...]
    in_channels: int
    out_channels: int
    has_prelu: bool = True
    residual_module: bool = False
    kernel_size: Optional[int] = None

    @property
    def radius(self) -> int:
        return max(max(abs(dy), abs(dx)) for dy, dx in self.taps) if self.taps else 0

    @property
    def declared_size(self) -> int:
        return self.kernel_size if self.kernel_size is not None else 2 * self.radius + 1

    def kernel(self) -> Tuple[int, int, np.ndarray]:
        """(kernel size, dilation, 0/1 mask) of the smallest dilated kernel holding the taps"""
        step = 0
        for dy, dx in self.taps:
            step = gcd(step, gcd(abs(dy), abs(dx)))
        step = max(step, 1)
        half = self.radius // step
        size = 2 * half + 1
        mask = np.zeros((size, size))
        for dy, dx in self.taps:
            mask[dy // step + half, dx // step + half] = 1.0
        return size, step, mask


class ResidualEdge(BaseModel):
    model_config = ConfigDict(frozen=True)

    tag: str
    src: int
    dst: Union[int, str]


class NetConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    name: str = 'custom'
    width: int = BSN_CONFIG['width']
    layers: Tuple[LayerSpec, ...] = ()
    residuals: Tuple[ResidualEdge, ...] = ()
    head: Tuple[int, ...] = ()

    @property
    def depth(self) -> int:
        return len(self.layers)

    @property
    def out_channels(self) -> int:
        if self.head:
            return self.head[-1]
        return self.layers[-1].out_channels if self.layers else 0

    def channels_at(self, node: Union[int, str]) -> int:
        if node == 0:
            return self.layers[0].in_channels
        if node == HEAD:
            return self.layers[-1].out_channels
        return self.layers[node - 1].out_channels

    def check_structure(self):
        """Raise NetConfigError for anything that cannot be built or analyzed"""
        if not self.layers:
            raise NetConfigError(f"config '{self.name}' has no layers (empty taps)")
        previous = self.layers[0].in_channels
        for k, layer in enumerate(self.layers, start=1):
            if not layer.taps:
                raise NetConfigError(f"layer {k} has no taps")
            if len(set(layer.taps)) != len(layer.taps):
                raise NetConfigError(f"layer {k} repeats a tap")
            half = layer.declared_size // 2
            if layer.radius > half:
                raise NetConfigError(f"layer {k} taps exceed its declared {layer.declared_size}x{layer.declared_size} kernel")
            if layer.in_channels != previous:
                raise NetConfigError(f"layer {k} expects {layer.in_channels} channels, gets {previous}")
            previous = layer.out_channels
        for edge in self.residuals:
            dst = self.depth + 1 if edge.dst == HEAD else edge.dst
            if not isinstance(dst, int) or not 0 <= edge.src <= self.depth or not 1 <= dst <= self.depth + 1:
                raise NetConfigError(f"residual edge {edge.src} -> {edge.dst} references a missing layer")
            if edge.src >= dst:
                raise NetConfigError(f"malformed DAG: residual edge {edge.src} -> {edge.dst} forms a cycle")
            if self.channels_at(edge.src) != self.channels_at(edge.dst):
                raise NetConfigError(f"residual edge {edge.src} -> {edge.dst} joins mismatched channel counts")
        if self.head and self.head[0] <= 0:
            raise NetConfigError("head widths must be positive")


# text format

def _parse_taps(text: str) -> Tuple[Tap, ...]:
    taps = []
    for item in text.split(','):
        dy, dx = item.split(':')
        taps.append((int(dy), int(dx)))
    return tuple(taps)


def grid_taps(grid: int, dilation: int = 1, center: bool = True) -> Tuple[Tap, ...]:
    half = grid // 2
    taps = []
    for i in range(-half, half + 1):
        for j in range(-half, half + 1):
            if i == 0 and j == 0 and not center:
                continue
            taps.append((i * dilation, j * dilation))
    return tuple(taps)


def _parse_layer(fields: List[str], line_no: int) -> LayerSpec:
    options = {}
    for field in fields:
        if '=' not in field:
            raise NetConfigError(f"line {line_no}: expected key=value, got '{field}'")
        key, value = field.split('=', 1)
        options[key] = value
    try:
        if 'taps' in options:
            taps = _parse_taps(options.pop('taps'))
        else:
            taps = grid_taps(int(options.pop('grid')), int(options.pop('dilation', 1)),
                             options.pop('center', '1') == '1')
        kernel = options.pop('kernel', None)
        spec = LayerSpec(
            taps=taps,
            in_channels=int(options.pop('in')),
            out_channels=int(options.pop('out')),
            has_prelu=options.pop('prelu', '1') == '1',
            residual_module=options.pop('rm', '0') == '1',
            kernel_size=int(kernel) if kernel is not None else None,
        )
    except (KeyError, ValueError) as e:
        raise NetConfigError(f"line {line_no}: malformed layer ({e})")
    if options:
        raise NetConfigError(f"line {line_no}: unknown layer keys {sorted(options)}")
    return spec


def parse_net_config(text: str) -> NetConfig:
    name, width, head = 'custom', BSN_CONFIG['width'], ()
    layers, residuals = [], []
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split('#', 1)[0].strip()
        if not line:
            continue
        word, *fields = line.split()
        try:
            if word == 'name':
                name = fields[0]
            elif word == 'width':
                width = int(fields[0])
            elif word == 'layer':
                layers.append(_parse_layer(fields, line_no))
            elif word == 'residual':
                tag, src, dst = fields
                residuals.append(ResidualEdge(tag=tag, src=int(src), dst=HEAD if dst == HEAD else int(dst)))
            elif word == 'head':
                head = tuple(int(f) for f in fields)
            else:
                raise NetConfigError(f"line {line_no}: unknown directive '{word}'")
        except (IndexError, ValueError) as e:
            raise NetConfigError(f"line {line_no}: malformed '{word}' directive ({e})")
    return NetConfig(name=name, width=width, layers=tuple(layers), residuals=tuple(residuals), head=head)


def format_net_config(cfg: NetConfig) -> str:
    lines = [f"name {cfg.name}", f"width {cfg.width}"]
    for layer in cfg.layers:
        taps = ','.join(f"{dy}:{dx}" for dy, dx in layer.taps)
        lines.append(f"layer taps={taps} kernel={layer.declared_size} in={layer.in_channels} "
                     f"out={layer.out_channels} prelu={int(layer.has_prelu)} rm={int(layer.residual_module)}")
    for edge in cfg.residuals:
        lines.append(f"residual {edge.tag} {edge.src} {edge.dst}")
    if cfg.head:
        lines.append('head ' + ' '.join(str(c) for c in cfg.head))
    return '\n'.join(lines) + '\n'


def load_net_config(source: str) -> NetConfig:
    """Preset name or path to a config file"""
    if source in PRESETS:
        return PRESETS[source]()
    try:
        with open(source, 'r', encoding='utf-8') as f:
            return parse_net_config(f.read())
    except OSError as e:
        raise NetConfigError(f"cannot read net config '{source}': {e}")


# presets

def _stack(name: str, kinds: List[Tuple[int, bool]], width: int, outer: bool = True, inner: bool = True,
           rm: bool = True, first_dilation: int = 1) -> NetConfig:
    layers = []
    for k, (dilation, center) in enumerate(kinds, start=1):
        layers.append(LayerSpec(
            taps=grid_taps(3, first_dilation if k == 1 else dilation, center),
            in_channels=1 if k == 1 else width,
            out_channels=width,
            has_prelu=True,
            residual_module=rm and k >= 2,
        ))
    residuals = []
    if inner and len(layers) >= 9:
        residuals.append(ResidualEdge(tag='inner', src=1, dst=9))
    if outer:
        residuals.append(ResidualEdge(tag='outer', src=1, dst=HEAD))
    return NetConfig(name=name, width=width, layers=tuple(layers), residuals=tuple(residuals),
                     head=(width, 2))


def fbi_safe_17(width: int = BSN_CONFIG['width'], outer: bool = True, inner: bool = True,
                rm: bool = True, name: str = 'fbi-safe-17') -> NetConfig:
    """Center-masked 3x3, three layers on the {-2,0,2}² lattice, thirteen on {-4,0,4}²"""
    kinds = [(1, False)] + [(2, True)] * 3 + [(4, True)] * 13
    return _stack(name, kinds, width, outer=outer, inner=inner, rm=rm)


def fbi_literal(width: int = BSN_CONFIG['width']) -> NetConfig:
    """L¹ -> L² (eight even holes) -> L³ (dilation 3 with center), composed sequentially"""
    return _stack('fbi-literal', [(1, False), (2, False), (3, True)], width, outer=False, inner=False, rm=False)


def fbi_literal_17(width: int = BSN_CONFIG['width']) -> NetConfig:
    kinds = [(1, False)] + [(2, False)] * 3 + [(3, True)] * 13
    return _stack('fbi-literal-17', kinds, width)


# component ablations: (outer RC, inner RC, RM)
ABLATIONS = {
    'case1': (False, True, True),
    'case2': (True, False, True),
    'case3': (True, True, False),
    'case4': (False, False, True),
    'case5': (False, True, False),
    'case6': (True, False, False),
    'case7': (False, False, False),
}

PRESETS = {
    'fbi-safe-17': fbi_safe_17,
    'fbi-literal': fbi_literal,
    'fbi-literal-17': fbi_literal_17,
}
for _case, (_outer, _inner, _rm) in ABLATIONS.items():
    PRESETS[f"fbi-safe-17-{_case}"] = (
        lambda o=_outer, i=_inner, r=_rm, c=_case: fbi_safe_17(outer=o, inner=i, rm=r, name=f"fbi-safe-17-{c}"))
