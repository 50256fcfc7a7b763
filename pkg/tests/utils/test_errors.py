import pytest

from oseen_phs.utils.errors import AcceptanceError, CompatibilityError, ConfigError, ConvergenceError
from oseen_phs.utils.errors import DimensionError, MeshError, MeshFormatError, OseenError, SingularSystemError
from oseen_phs.utils.errors import SolverError, get_exception_msg


@pytest.mark.parametrize(
    "error, code",
    [
        (ConfigError("x"), 2),
        (DimensionError("x"), 2),
        (CompatibilityError("x"), 2),
        (MeshError("x"), 3),
        (MeshFormatError("x", 4), 3),
        (SolverError("x"), 4),
        (SingularSystemError("x", 7), 4),
        (ConvergenceError("x", 12), 4),
        (AcceptanceError("x"), 5),
    ],
)
def test_exit_codes(error, code):
    assert isinstance(error, OseenError)
    assert error.exit_code == code


def test_messages():
    assert get_exception_msg(MeshFormatError("bad tag", 9)) == "line 9: bad tag"
    assert get_exception_msg(SingularSystemError("singular", 3)) == "singular (zero pivot at unknown 3)"
    assert get_exception_msg(ConvergenceError("GMRES stalled", 40)) == "GMRES stalled after 40 iterations"
    assert get_exception_msg(ValueError("plain")) == "plain"
