import pytest

from oseen_phs.utils.progress import progressify_sequence, should_report


def test_progressify_sequence():
    pairs = list(progressify_sequence(["a", "b", "c", "d"]))

    assert [item for item, _ in pairs] == ["a", "b", "c", "d"]
    assert [fraction for _, fraction in pairs] == pytest.approx([0.25, 0.5, 0.75, 1.0])


def test_progressify_sequence_bounds():
    pairs = list(progressify_sequence(range(2), lower_bound=0.5, upper_bound=1.0))

    assert [fraction for _, fraction in pairs] == pytest.approx([0.75, 1.0])


def test_progressify_empty_sequence():
    assert list(progressify_sequence([])) == []


@pytest.mark.parametrize(
    "fraction, previous, expected",
    [(0.05, 0.0, False), (0.1, 0.0, True), (0.25, 0.1, True), (0.29, 0.2, False), (1.0, 0.9, True)],
)
def test_should_report(fraction, previous, expected):
    assert should_report(fraction, previous) is expected
