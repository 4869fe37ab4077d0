from .config import ConfigError, RunConfig, family_template
from .report import Report, read

__all__ = ["ConfigError", "RunConfig", "Report", "family_template", "read"]
