# SPDX-License-Identifier: Apache-2.0
"""Joint-transmission beamforming simulator bindings."""

from ._core import (
    ScenarioConfig,
    config_from_string,
    csv_header,
    derive_doppler,
    format_config,
    load_config,
    run_scenario,
)

__all__ = [
    "ScenarioConfig",
    "config_from_string",
    "csv_header",
    "derive_doppler",
    "format_config",
    "load_config",
    "run_scenario",
]

__version__ = "0.1.0"
