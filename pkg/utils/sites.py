"""Where a request is executed."""

from enum import Enum


class Site(str, Enum):
    EDGE = "edge"
    CLOUD = "cloud"
