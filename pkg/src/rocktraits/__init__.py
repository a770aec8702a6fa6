"""Rock-trait statistics from tiled instance detections on a georeferenced scarp."""

__version__ = "0.1.0"
