import logging

from oseen_phs.utils.logger import CustomFormatter, LogLevel, logger, set_verbosity


def test_set_verbosity():
    try:
        set_verbosity(LogLevel.WARNING)

        assert logger.level == logging.WARNING
        assert all(handler.level == logging.WARNING for handler in logger.handlers)
    finally:
        set_verbosity(LogLevel.INFO)


def test_formatter_names_the_logger():
    record = logging.LogRecord("OseenPHS", logging.WARNING, __file__, 1, "ledger residual high", None, None)

    text = CustomFormatter().format(record)

    assert "[OseenPHS]" in text
    assert "ledger residual high" in text
    assert CustomFormatter.yellow in text
