from .channel import *
from .config import *
from .eclipse import *
from .experiment import *
from .mapping import *
from .scenario import *
