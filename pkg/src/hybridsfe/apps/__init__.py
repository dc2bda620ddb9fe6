"""The three demo applications and a tiny registry the CLI and bench use."""

from .database import DatabaseApp, DatabaseConfig, Query, build_database_scheme
from .dijkstra import DijkstraApp, DijkstraConfig, RouteResult, build_dijkstra_scheme
from .millionaires import MillionairesApp, build_millionaires

APPS = ("millionaires", "database", "dijkstra")
MODES = ("naive", "sgx", "hybrid", "gc")

__all__ = [
    "APPS", "MODES", "DatabaseApp", "DatabaseConfig", "DijkstraApp", "DijkstraConfig", "MillionairesApp",
    "Query", "RouteResult", "build_database_scheme", "build_dijkstra_scheme", "build_millionaires",
]
