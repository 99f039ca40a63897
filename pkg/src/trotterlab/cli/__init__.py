"""Command-line experiment driver (``lab``)."""
