from networks.net_config import LayerSpec, NetConfig, ResidualEdge, load_net_config, parse_net_config, format_net_config, PRESETS
from networks.analyzer import DisplacementSet, count_parameters, displacement_set, receptive_field, verify_blind_spot
from networks.bsn_net import BlindSpotNet, BlindSpotReport, blind_spot_check, build_net, residual_module
from networks.pge_net import PgeNet, pge_forward

__all__ = [
    'LayerSpec', 'NetConfig', 'ResidualEdge', 'load_net_config', 'parse_net_config', 'format_net_config', 'PRESETS',
    'DisplacementSet', 'count_parameters', 'displacement_set', 'receptive_field', 'verify_blind_spot',
    'BlindSpotNet', 'BlindSpotReport', 'blind_spot_check', 'build_net', 'residual_module',
    'PgeNet', 'pge_forward',
]
