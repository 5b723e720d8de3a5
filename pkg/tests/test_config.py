import importlib

import pytest

import config


@pytest.mark.parametrize("value, expected", [("4", 4), ("1", 1), ("0", 1), ("-3", 1),
                                             ("two", 1), ("2.5", 1), ("", 1), (None, 1)])
def test_thread_count_from_environment(value, expected):
    assert config._threads(value) == expected


def test_bad_thread_variable_does_not_break_import(monkeypatch):
    monkeypatch.setenv("KILLING_GEO_THREADS", "many")
    try:
        assert importlib.reload(config).THREADS == 1
    finally:
        monkeypatch.delenv("KILLING_GEO_THREADS")
        importlib.reload(config)
