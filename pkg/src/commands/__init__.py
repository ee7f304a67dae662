"""CLI commands, registered onto the root group by src.main.create_cli."""
