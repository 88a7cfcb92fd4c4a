# app.py - Application factory and the `xolap` command-line entry point
import logging

from flask import Flask
from flask.cli import FlaskGroup
from flask.logging import default_handler

# Import blueprints
from blueprints.query import query_bp
from blueprints.olap import olap_bp


def create_app(test_config=None):
    """Application factory pattern."""
    app = Flask(__name__)
    app.config.from_mapping(
        ORACLE_LIMIT=500,
        MATCH_ORACLE_PATTERN_LIMIT=8,
        MATCH_ORACLE_TREE_LIMIT=40,
        AVG_TOLERANCE='1e-9',
        LOG_LEVEL='WARNING',
    )
    # XOLAP_ORACLE_LIMIT=1000 and friends
    app.config.from_prefixed_env('XOLAP')
    if test_config is not None:
        app.config.from_mapping(test_config)

    # Engine modules log under "utils"; route them to stderr like app.logger
    engine_logger = logging.getLogger('utils')
    if default_handler not in engine_logger.handlers:
        engine_logger.addHandler(default_handler)
    engine_logger.setLevel(app.config['LOG_LEVEL'])
    app.logger.setLevel(app.config['LOG_LEVEL'])

    # Register blueprints
    app.register_blueprint(query_bp)
    app.register_blueprint(olap_bp)

    return app


cli = FlaskGroup(create_app=create_app, add_default_commands=False,
                 add_version_option=False, load_dotenv=False, set_debug_flag=False,
                 help='Pattern-tree queries and rollups over XML documents.')


if __name__ == '__main__':
    cli(prog_name='xolap')
