# UAV mmWave Channel Model - Core Package
__version__ = "0.1.0"
