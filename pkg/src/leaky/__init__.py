"""Spectral experiments on staircase domains with a narrowing tail of rectangles."""
from .domain import LeakyDomain, ParameterFamily, area_constant, build_domain, domain_from_config, preset
from .mollifier import Mollifier
from .quasimode import QuasimodeIndex, QuasimodeReport

__version__ = "0.1.0"

__all__ = ["LeakyDomain", "ParameterFamily", "Mollifier", "QuasimodeIndex", "QuasimodeReport",
           "area_constant", "build_domain", "domain_from_config", "preset", "__version__"]
