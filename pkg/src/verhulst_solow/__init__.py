"""Modified Verhulst-Solow growth model: quasi-polynomial reduction, stability
analysis across carrying-capacity regimes, and allometric fitting of historical
population, output and energy series."""

__version__ = "0.1.0"
