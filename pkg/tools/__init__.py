"""Command implementations behind the pbgnet CLI."""
