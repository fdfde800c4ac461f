"""Bundled scenario files (*.cfg) shipped as package data."""
