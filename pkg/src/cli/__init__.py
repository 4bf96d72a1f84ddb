"""CLI entrypoints for donor-stark."""
