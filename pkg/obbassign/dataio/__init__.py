"""
DOTA-format annotation and result I/O, image tiling and rotation augmentation.
"""
