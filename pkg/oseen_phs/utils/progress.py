from collections.abc import Generator, Sequence
from typing import TypeVar


T = TypeVar("T")


def progressify_sequence(
    items: Sequence[T], lower_bound: float = 0.0, upper_bound: float = 1.0
) -> "Generator[tuple[T, float], None, None]":
    """
    Pairs every item with the fraction of work done once it is processed.
    Args:
        items (Sequence[T]): The items to iterate over.
        lower_bound (float): Fraction reported before the first item.
        upper_bound (float): Fraction reported after the last item.
    Returns:
        Generator[tuple[T, float], None, None]: (item, fraction) pairs.
    """
    num_steps = len(items)
    if num_steps == 0:
        return

    progress_step = (upper_bound - lower_bound) / num_steps

    for i, item in enumerate(items):
        yield item, lower_bound + progress_step * (i + 1)


def should_report(fraction: float, previous: float, every: float = 0.1) -> bool:
    """True when `fraction` crossed a multiple of `every` since `previous`."""
    return int(fraction / every + 1e-9) > int(previous / every + 1e-9)
