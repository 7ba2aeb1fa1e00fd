"""Fixed-point tools for Hammerstein integral equations and measures of
noncompactness on l1."""

__version__ = "0.1.0"
