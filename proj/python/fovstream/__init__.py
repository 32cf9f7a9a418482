from ._fovstream import *  # noqa: F401,F403
from ._fovstream import __doc__  # noqa: F401
