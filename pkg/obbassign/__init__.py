"""
Oriented-box label assignment toolkit: elliptical center sampling, center-distance
resolution of shared cells, multi-level sampling, box decoding, losses, rotated
NMS, DOTA tooling and rotated-box mAP evaluation.
"""
