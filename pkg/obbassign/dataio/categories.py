"""
Category lists of the supported aerial datasets.
"""
from typing import Dict, List


DOTA_V1_0 = [
    'plane', 'baseball-diamond', 'bridge', 'ground-track-field', 'small-vehicle',
    'large-vehicle', 'ship', 'tennis-court', 'basketball-court', 'storage-tank',
    'soccer-ball-field', 'roundabout', 'harbor', 'swimming-pool', 'helicopter',
]

DOTA_V1_5 = DOTA_V1_0 + ['container-crane']

HRSC2016 = ['ship']

REGISTRY: Dict[str, List[str]] = {
    'dota1.0': DOTA_V1_0,
    'dota1.5': DOTA_V1_5,
    'hrsc2016': HRSC2016,
}


def resolve_classes(spec: str) -> List[str]:
    """
    Class names from a registry name or a comma-separated list.

    Args:
        spec: 'dota1.0', 'dota1.5', 'hrsc2016' or e.g. 'ship,harbor'

    Returns:
        Ordered list of class names; position is the class index
    """
    key = spec.strip().lower()
    if key in REGISTRY:
        return list(REGISTRY[key])
    names = [name.strip() for name in spec.split(',') if name.strip()]
    if not names:
        raise ValueError(f"No class names in '{spec}'")
    if len(set(names)) != len(names):
        raise ValueError(f"Duplicate class names in '{spec}'")
    return names
