from .errors import *
from .utils import *
from .storage import *
from .array import *
from .scene import *
from .link import *
from .dataset import *
from .regressor import *
from .clustering import *
from .selection import *
from .config import *
from .experiment import *
from .report import *
from .commands import *
