"""Bundled TOML configurations."""
