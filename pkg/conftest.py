# conftest.py - Shared pytest fixtures
from pathlib import Path

import pytest

from app import create_app
from utils.xmltree import load_document

FIXTURES = Path(__file__).parent / 'fixtures'


@pytest.fixture
def app():
    """Application configured for tests."""
    return create_app({'TESTING': True, 'LOG_LEVEL': 'DEBUG'})


@pytest.fixture
def runner(app):
    return app.test_cli_runner()


@pytest.fixture
def fixtures_dir():
    return FIXTURES


@pytest.fixture
def books():
    return load_document(FIXTURES / 'books.xml')


@pytest.fixture
def sales():
    return load_document(FIXTURES / 'sales.xml')


@pytest.fixture
def simple_sales():
    return load_document(FIXTURES / 'simple_sales.xml')
