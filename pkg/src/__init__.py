"""donor-stark: hyperfine Stark shift of a silicon donor near an interface."""

__version__ = "0.1.0"
