"""Organ classes and the parent/child relationships between them."""

import enum


class OrganClass(str, enum.Enum):
    MAIN_CORDON = "main_cordon"
    ARM = "arm"
    SPUR = "spur"
    CANE = "cane"
    NODE = "node"


# parent -> child pairs, in the order the model builder runs them
CONNECTION_TABLE = (
    (OrganClass.MAIN_CORDON, OrganClass.ARM),
    (OrganClass.MAIN_CORDON, OrganClass.SPUR),
    (OrganClass.MAIN_CORDON, OrganClass.CANE),
    (OrganClass.ARM, OrganClass.SPUR),
    (OrganClass.ARM, OrganClass.CANE),
    (OrganClass.SPUR, OrganClass.CANE),
    (OrganClass.CANE, OrganClass.NODE),
)

LEGAL_CHILDREN = {}
for _p, _c in CONNECTION_TABLE:
    LEGAL_CHILDREN.setdefault(_p, set()).add(_c)
del _p, _c

REGION_CLASSES = frozenset({OrganClass.ARM, OrganClass.SPUR, OrganClass.CANE})
