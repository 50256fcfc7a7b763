from .mesh import *
from .linalg import *
from .forms import *
from .flow import *
from .config import *
from .system import *
