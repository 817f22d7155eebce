"""Inter-urban corporate ownership networks: ingest, city assignment, control
chains, ownership-link revenue and correspondence analysis of city sectors."""

from ._accel import backend
from .ca import CAResult, correspondence_analysis, trajectories
from .geo import SpatialIndex, assign_all, assign_fua, build_index
from .ingest import Firm, FunctionalUrbanArea, OwnershipLink, Snapshot, load_snapshot, parse_firms, parse_fua, parse_links
from .metrics import aggregate_city_forces, city_pair_matrix, link_force, nace_section, sector_matrix, top_links
from .netgraph import GeoScope, ScopeConfig, build_graph, classify_scope, detect_cycles, extract_chains

__version__ = "0.1.0"

__all__ = [
    "backend", "CAResult", "correspondence_analysis", "trajectories", "SpatialIndex", "assign_all", "assign_fua",
    "build_index", "Firm", "FunctionalUrbanArea", "OwnershipLink", "Snapshot", "load_snapshot", "parse_firms",
    "parse_fua", "parse_links", "aggregate_city_forces", "city_pair_matrix", "link_force", "nace_section",
    "sector_matrix", "top_links", "GeoScope", "ScopeConfig", "build_graph", "classify_scope", "detect_cycles",
    "extract_chains",
]
