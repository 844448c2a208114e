"""Python bindings for the gcnc library."""

from ._gcnc import *  # noqa: F401,F403
from ._gcnc import __doc__  # noqa: F401
