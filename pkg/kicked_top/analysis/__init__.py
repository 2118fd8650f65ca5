"""Power-law fits, saturation detection and parameter sweeps over QFI traces."""
